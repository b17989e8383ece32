#pragma once

#include <variant>

#include "df2/learncore.hpp"
#include "df2/objectives.hpp"

namespace df2 {

/// exp(-|x - x'|^2 / (2 h^2))
struct RbfKernel {
  double bandwidth = 1.0;
};
/// exp(x'x' / scale); the softmax-attention kernel when scale = sqrt(d).
struct ExponentialKernel {
  double scale = 1.0;
};

struct KernelSpec {
  std::variant<RbfKernel, ExponentialKernel> kind;

  static KernelSpec rbf(double bandwidth);
  static KernelSpec exponential(double scale);
  void validate() const;
  double operator()(const Vec& a, const Vec& b) const;
};

/// Pairwise kernel values between the rows of X.
Mat gram(const Mat& X, const KernelSpec& kernel);

/// beta = (K + lambda I)^{-1} k_x with k_x[s] = k(X_s, x). Cholesky with the
/// jitter escalated to 10 lambda and 100 lambda if the factorization fails.
/// The weights need not be nonnegative nor sum to one.
Vec cme_weights(const Mat& X, const Vec& x, const KernelSpec& kernel, double lambda = 1e-3);

/// sum_s beta_s f(Y_s, a)
double cme_expectation(const Vec& beta, const Mat& Y, const TaskObjective& objective, const Vec& a);

/// Conditional-KDE expectation with an exponential kernel over the keys:
/// sum_s exp(q'k_s / scale) f(v_s, a) / sum_s exp(q'k_s / scale).
double kde_conditional_expectation(const Mat& keys, const Mat& values, const Vec& query, double scale,
                                   const TaskObjective& objective, const Vec& a);

}  // namespace df2
