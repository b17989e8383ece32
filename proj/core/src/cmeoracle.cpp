#include "df2/cmeoracle.hpp"

#include <cmath>

namespace df2 {

KernelSpec KernelSpec::rbf(double bandwidth) {
  KernelSpec k{RbfKernel{bandwidth}};
  k.validate();
  return k;
}

KernelSpec KernelSpec::exponential(double scale) {
  KernelSpec k{ExponentialKernel{scale}};
  k.validate();
  return k;
}

void KernelSpec::validate() const {
  if (const auto* r = std::get_if<RbfKernel>(&kind)) {
    if (!(r->bandwidth > 0.0)) throw ConfigError("kernel: RBF bandwidth must be > 0");
  } else if (!(std::get<ExponentialKernel>(kind).scale > 0.0)) {
    throw ConfigError("kernel: exponential scale must be > 0");
  }
}

double KernelSpec::operator()(const Vec& a, const Vec& b) const {
  if (a.size() != b.size()) throw DimensionError("kernel: argument dims differ");
  if (const auto* r = std::get_if<RbfKernel>(&kind)) {
    return std::exp(-(a - b).squaredNorm() / (2.0 * r->bandwidth * r->bandwidth));
  }
  return std::exp(a.dot(b) / std::get<ExponentialKernel>(kind).scale);
}

Mat gram(const Mat& X, const KernelSpec& kernel) {
  kernel.validate();
  const Eigen::Index n = X.rows();
  Mat K(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      K(i, j) = kernel(X.row(i).transpose(), X.row(j).transpose());
      K(j, i) = K(i, j);
    }
  }
  return K;
}

Vec cme_weights(const Mat& X, const Vec& x, const KernelSpec& kernel, double lambda) {
  if (!(lambda > 0.0)) throw ConfigError("cme weights: lambda must be > 0");
  if (X.rows() < 1) throw ConfigError("cme weights: need at least one training point");
  if (x.size() != X.cols()) throw DimensionError("cme weights: x dim != training dim");
  const Mat K = gram(X, kernel);
  Vec kx(X.rows());
  for (Eigen::Index s = 0; s < X.rows(); ++s) kx[s] = kernel(X.row(s).transpose(), x);
  const Eigen::Index n = X.rows();
  for (double jitter : {lambda, 10.0 * lambda, 100.0 * lambda}) {
    Eigen::LLT<Mat> llt(K + jitter * Mat::Identity(n, n));
    if (llt.info() != Eigen::Success) continue;
    Vec beta = llt.solve(kx);
    if (beta.allFinite()) return beta;
  }
  throw NumericError("cme weights: regularized Gram matrix is not positive definite");
}

double cme_expectation(const Vec& beta, const Mat& Y, const TaskObjective& objective, const Vec& a) {
  if (beta.size() != Y.rows()) throw DimensionError("cme expectation: |beta| != rows(Y)");
  Vec f;
  objective.cost_rows(Y, a, f);
  return beta.dot(f);
}

double kde_conditional_expectation(const Mat& keys, const Mat& values, const Vec& query, double scale,
                                   const TaskObjective& objective, const Vec& a) {
  if (!(scale > 0.0)) throw ConfigError("kde expectation: scale must be > 0");
  if (keys.rows() != values.rows() || keys.rows() < 1) throw DimensionError("kde expectation: keys/values rows");
  if (keys.cols() != query.size()) throw DimensionError("kde expectation: query dim != key dim");
  // kernel values exp(q'k_s / scale), shifted by their max before exponentiating
  const Vec logk = keys * query / scale;
  const double shift = logk.maxCoeff();
  double num = 0.0;
  double den = 0.0;
  for (Eigen::Index s = 0; s < keys.rows(); ++s) {
    const double k = std::exp(logk[s] - shift);
    num += k * objective.cost(values.row(s).transpose(), a);
    den += k;
  }
  return num / den;
}

}  // namespace df2
