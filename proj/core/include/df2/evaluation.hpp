#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "df2/objectives.hpp"
#include "df2/simdata.hpp"
#include "df2/solvers.hpp"

namespace df2 {

/// E[f(y, a) | x] under the true data distribution of a synthetic task.
class TrueExpectation {
 public:
  virtual ~TrueExpectation() = default;
  virtual double value(const Vec& x, const Vec& a) const = 0;
  virtual Vec grad(const Vec& x, const Vec& a) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

/// Monte Carlo estimate from n draws of the generator at x. The draws for a
/// given x are fixed (seeded from the base seed and x), so value and grad are
/// those of one deterministic sample average.
class McExpectation final : public TrueExpectation {
 public:
  McExpectation(GmmGenerator gen, ObjectivePtr objective, int n_mc = 100000, std::uint64_t seed = 0);
  double value(const Vec& x, const Vec& a) const override;
  Vec grad(const Vec& x, const Vec& a) const override;
  nlohmann::json to_json() const override;
  const Mat& draws(const Vec& x) const;

 private:
  GmmGenerator gen_;
  ObjectivePtr objective_;
  int n_mc_;
  std::uint64_t seed_;
  mutable Vec cached_x_;
  mutable Mat cached_y_;
};

/// Closed form for the separable hinge/quadratic objectives (synthetic convex,
/// synthetic nonconvex, inventory) under the Gaussian mixture generator, using
/// Gaussian partial moments per coordinate.
class ExactGmmExpectation final : public TrueExpectation {
 public:
  ExactGmmExpectation(GmmGenerator gen, ObjectivePtr objective);
  static bool supports(const TaskObjective& objective);
  double value(const Vec& x, const Vec& a) const override;
  Vec grad(const Vec& x, const Vec& a) const override;
  nlohmann::json to_json() const override;

 private:
  GmmGenerator gen_;
  ObjectivePtr objective_;
  std::array<double, 5> coef_{};  // u+, (-u)+, u+^2, (-u)+^2, a^3
};

struct OracleResult {
  Vec a;
  double expected_cost = 0.0;
};

/// Minimizes the true expectation over the feasible set with
/// multistart_minimize().
OracleResult oracle_decision(const Vec& x, const TrueExpectation& truth, const FeasibleSet& set,
                             const PgdConfig& solver, int restarts = 5, std::uint64_t seed = 0);
/// MC oracle with n_mc draws from the generator.
OracleResult oracle_decision(const Vec& x, const GmmGenerator& gen, ObjectivePtr objective, int n_mc,
                             const PgdConfig& solver, std::uint64_t seed = 0);

struct RegretReport {
  std::vector<int> index;               // dataset rows evaluated
  std::vector<double> realized;         // f(y_i, a_i)
  std::vector<double> oracle_realized;  // f(y_i, a*_i)
  std::vector<double> expected;         // E[f | x_i](a_i)
  std::vector<double> oracle_expected;  // E[f | x_i](a*_i)
  std::vector<double> gap;              // expected - oracle_expected
  std::vector<int> infeasible;          // rows whose decision left the feasible set
  bool has_oracle = false;
  double mean_cost = 0.0;
  double mean_oracle_cost = 0.0;
  double mean_gap = 0.0;
  double gap_std = 0.0;
  double gap_stderr = 0.0;
  double runtime_seconds = 0.0;
  std::string fingerprint;
  nlohmann::json config = nlohmann::json::object();

  nlohmann::json to_json(bool per_sample = true, bool include_runtime = true) const;
};

/// Rows of the test split, or every row when nothing is tagged test.
std::vector<int> evaluation_rows(const Dataset& ds);

std::vector<OracleResult> oracle_table(const Dataset& ds, const std::vector<int>& rows, const TrueExpectation& truth,
                                       const FeasibleSet& set, const PgdConfig& solver, int restarts = 5,
                                       std::uint64_t seed = 0);

/// decisions[k] is the decision for ds row rows[k]. With truth and oracle
/// given, the regret gap is reported as well.
RegretReport decision_regret(const std::vector<Vec>& decisions, const Dataset& ds, const std::vector<int>& rows,
                             const TaskObjective& objective, const TrueExpectation* truth = nullptr,
                             const std::vector<OracleResult>* oracle = nullptr);

using Decider = std::function<Vec(const Vec&)>;
RegretReport decision_regret(const Decider& decider, const Dataset& ds, const TaskObjective& objective,
                             const TrueExpectation* truth = nullptr, const std::vector<OracleResult>* oracle = nullptr);

/// resolution^2 rows (a1, a2, value) over a 2D box, a1 varying slowest.
Mat landscape_grid(const std::function<double(const Vec&)>& value, const Box& box, int resolution);
void write_landscape_csv(std::ostream& os, const Mat& grid);

double pearson(const Vec& a, const Vec& b);

/// Fits a predictor of E[f | x](a) from a dataset.
using Predictor = std::function<double(const Vec& x, const Vec& a)>;
using ModelFamily = std::function<Predictor(const Dataset& train, std::uint64_t seed)>;

struct BiasVariance {
  double mse = 0.0;
  double bias2 = 0.0;
  double variance = 0.0;
  int probes = 0;
  int trials = 0;
};

/// Fits the family on `trials` independent datasets of n_train draws and
/// compares fits with the true expectation at 16 seeded (x, a) probes.
/// variance uses 1/trials so that mse == bias2 + variance up to rounding.
BiasVariance bias_variance_probe(const ModelFamily& family, const GmmGenerator& gen, const TrueExpectation& truth,
                                 const FeasibleSet& set, int trials, int n_train, std::uint64_t seed,
                                 int probes = 16);

/// Least squares on quadratic features of (x, a) against f(y, a) at
/// `actions` uniform actions per record; linear in its parameters.
ModelFamily linear_feature_family(ObjectivePtr objective, int actions = 20, double ridge = 1e-8);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string fingerprint(const nlohmann::json& config);

}  // namespace df2
