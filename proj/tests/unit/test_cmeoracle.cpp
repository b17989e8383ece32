#include <gtest/gtest.h>

#include <algorithm>

#include "df2/cmeoracle.hpp"
#include "df2/surrogate.hpp"
#include "test_util.hpp"

using namespace df2;
using namespace df2::testing;

namespace {

// f(y, a) = (y - a)^2, so E[f] has a closed form for Gaussian noise.
class SquaredError final : public TaskObjective {
 public:
  std::string tag() const override { return "squared-error"; }
  int decision_dim() const override { return 1; }
  int outcome_dim() const override { return 1; }
  const FeasibleSet& feasible() const override { return set_; }
  double cost(const Vec& y, const Vec& a) const override { return (y - a).squaredNorm(); }
  Vec grad_a(const Vec& y, const Vec& a) const override { return 2.0 * (a - y); }
  Vec grad_y(const Vec& y, const Vec& a) const override { return 2.0 * (y - a); }
  nlohmann::json to_json() const override { return {{"type", tag()}}; }

 private:
  FeasibleSet set_ = FeasibleSet::uniform_box(1, -2.0, 2.0);
};

}  // namespace

TEST(Gram, RbfExamples) {
  Mat X(3, 1);
  X << 0.0, 1.0, 0.0;
  const Mat K = gram(X, KernelSpec::rbf(1.0));
  EXPECT_EQ(K.diagonal(), Vec::Ones(3));
  EXPECT_DOUBLE_EQ(K(0, 1), std::exp(-0.5));
  EXPECT_EQ(K.row(0), K.row(2));
  EXPECT_EQ(K, K.transpose());
  EXPECT_THROW(KernelSpec::rbf(0.0), ConfigError);
  EXPECT_THROW(KernelSpec::exponential(-1.0), ConfigError);
}

TEST(CmeWeights, ScalarSolveAndFarPoints) {
  Mat X(1, 2);
  X << 0.3, -0.2;
  const Vec b = cme_weights(X, X.row(0).transpose(), KernelSpec::rbf(1.0), 0.1);
  EXPECT_NEAR(b[0], 1.0 / 1.1, 1e-12);
  const Vec far = cme_weights(X, Vec::Constant(2, 100.0), KernelSpec::rbf(1.0), 0.1);
  EXPECT_LT(far.cwiseAbs().maxCoeff(), 1e-100);
}

TEST(CmeWeights, NeedNotBeAProbabilityVector) {
  Mat X(2, 1);
  X << 0.0, 0.5;
  const Vec b = cme_weights(X, Vec::Constant(1, 1.5), KernelSpec::rbf(0.5), 1e-3);
  EXPECT_LT(b.minCoeff(), 0.0);
  EXPECT_GT(std::abs(b.sum() - 1.0), 1e-3);
}

TEST(CmeWeights, SolvesTheRegularizedSystem) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const Mat X = random_mat(40, 3, rng);
    const Vec x = random_vec(3, rng);
    const double lambda = 1e-3;
    const KernelSpec k = KernelSpec::rbf(0.7);
    const Vec b = cme_weights(X, x, k, lambda);
    Vec kx(40);
    for (int s = 0; s < 40; ++s) kx[s] = k(X.row(s).transpose(), x);
    const Mat A = gram(X, k) + lambda * Mat::Identity(40, 40);
    EXPECT_LT((A * b - kx).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(CmeExpectation, WeightedSums) {
  const Objective obj = Objective::synthetic_convex();
  std::mt19937_64 rng(3);
  const Mat Y = random_mat(5, 2, rng, -2, 2);
  const Vec a = random_vec(2, rng);
  Vec f(5);
  for (int s = 0; s < 5; ++s) f[s] = obj.cost(Y.row(s).transpose(), a);
  EXPECT_DOUBLE_EQ(cme_expectation(Vec::Unit(5, 3), Y, obj, a), f[3]);
  EXPECT_NEAR(cme_expectation(Vec::Constant(5, 0.2), Y, obj, a), f.mean(), 1e-12);
  const Vec beta = random_vec(5, rng);
  double manual = 0;
  for (int s = 0; s < 5; ++s) manual += beta[s] * f[s];
  EXPECT_NEAR(cme_expectation(beta, Y, obj, a), manual, 1e-12);
  EXPECT_THROW(cme_expectation(Vec::Ones(4), Y, obj, a), DimensionError);
}

TEST(KdeExpectation, TrivialCases) {
  const Objective obj = Objective::synthetic_convex();
  std::mt19937_64 rng(4);
  const Mat V = random_mat(4, 2, rng, -2, 2);
  const Vec a = random_vec(2, rng);
  const Mat equal_keys = Mat::Ones(4, 3);
  double mean = 0;
  for (int s = 0; s < 4; ++s) mean += obj.cost(V.row(s).transpose(), a) / 4;
  EXPECT_NEAR(kde_conditional_expectation(equal_keys, V, random_vec(3, rng), 2.0, obj, a), mean, 1e-12);
  EXPECT_DOUBLE_EQ(kde_conditional_expectation(Mat::Ones(1, 3), V.topRows(1), random_vec(3, rng), 2.0, obj, a),
                   obj.cost(V.row(0).transpose(), a));
  // huge logits do not overflow
  const double big = kde_conditional_expectation(1e4 * random_mat(4, 3, rng), V, Vec::Ones(3), 1.0, obj, a);
  EXPECT_TRUE(std::isfinite(big));
}

TEST(KdeExpectation, EqualsTheAttentionSurrogate) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const bool inv = t % 2 == 1;
    const ObjectivePtr obj = std::make_shared<Objective>(inv ? Objective::inventory() : Objective::synthetic_convex());
    AttentionSurrogate m = AttentionSurrogate::make(4, obj, 20, 8, 16, static_cast<std::uint64_t>(t));
    m.keys = random_mat(20, 8, rng, -2, 2);
    m.values = random_mat(20, obj->outcome_dim(), rng, -2, 3);
    const Vec x = random_vec(4, rng, -3, 3);
    const Vec a = random_vec(obj->decision_dim(), rng);
    const Vec q = surrogate_query(m, x);
    const double kde = kde_conditional_expectation(m.keys, m.values, q, std::sqrt(8.0), *obj, a);
    EXPECT_LT(std::abs(g(m, x, a) - kde), 1e-9);
  }
}

TEST(CmeConsistency, ErrorShrinksWithMorePoints) {
  // y = sin(3x) + N(0, 0.1^2); with squared error E[f] = (sin 3x - a)^2 + 0.01.
  const SquaredError obj;
  std::vector<double> med;
  for (int S : {10, 100, 1000}) {
    std::vector<double> errs;
    for (int trial = 0; trial < 10; ++trial) {
      std::mt19937_64 rng(static_cast<std::uint64_t>(1000 * trial + S));
      std::normal_distribution<double> noise(0.0, 0.1);
      const Mat X = random_mat(S, 1, rng);
      Mat Y(S, 1);
      for (int s = 0; s < S; ++s) Y(s, 0) = std::sin(3 * X(s, 0)) + noise(rng);
      double err = 0;
      for (double xq : {-0.6, -0.2, 0.3, 0.7}) {
        const Vec beta = cme_weights(X, Vec::Constant(1, xq), KernelSpec::rbf(0.2), 1e-3);
        const Vec a = Vec::Constant(1, 0.25);
        const double truth = std::pow(std::sin(3 * xq) - 0.25, 2) + 0.01;
        err += std::abs(cme_expectation(beta, Y, obj, a) - truth);
      }
      errs.push_back(err);
    }
    std::nth_element(errs.begin(), errs.begin() + 5, errs.end());
    med.push_back(errs[5]);
  }
  EXPECT_GT(med[0], med[1]);
  EXPECT_GT(med[1], med[2]);
}
