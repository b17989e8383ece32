#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "df2/learncore.hpp"
#include "df2/objectives.hpp"

namespace df2 {

using ValueFn = std::function<double(const Vec&)>;
using GradFn = std::function<Vec(const Vec&)>;

Vec project_box(const Vec& a, const Box& box);

struct SolveResult {
  Vec a;                      // best iterate
  double value = 0.0;         // value at the best iterate
  std::vector<double> trace;  // best-so-far value after each iteration (trace[0] is a0)
};

struct PgdConfig {
  double lr = 0.01;
  int iters = 500;
  int restarts = 1;        // > 1: minimize_over() runs multistart_minimize()
  std::uint64_t seed = 0;  // screen draws for the restarts
};

/// Adam steps on grad, projected back into the box after every step.
/// a0 defaults to the box center. Returns the best iterate seen.
SolveResult pgd_minimize(const ValueFn& value, const GradFn& grad, const Box& box, const PgdConfig& cfg,
                         std::optional<Vec> a0 = std::nullopt);

/// a <- budget * a exp(-lr g) / sum(a exp(-lr g)). a0 is required (it fixes
/// the dimension) and must be strictly positive with sum == budget;
/// minimize_over() supplies the uniform allocation.
SolveResult mirror_descent_simplex(const ValueFn& value, const GradFn& grad, double budget, const PgdConfig& cfg,
                                   std::optional<Vec> a0 = std::nullopt);

/// Picks the solver matching the feasible set. Without a0 and with
/// cfg.restarts > 1 this is multistart_minimize().
SolveResult minimize_over(const FeasibleSet& set, const ValueFn& value, const GradFn& grad, const PgdConfig& cfg,
                          std::optional<Vec> a0 = std::nullopt);

inline constexpr int kScreenCornerDims = 10;
inline constexpr int kScreenDraws = 256;

/// Runs the set's solver from `restarts` starts and keeps the best result.
/// The starts are low, mutually separated points of a screen over the
/// center, the box corners (boxes up to kScreenCornerDims dims) and
/// kScreenDraws seeded feasible draws. The trace is that of the best run.
SolveResult multistart_minimize(const FeasibleSet& set, const ValueFn& value, const GradFn& grad,
                                const PgdConfig& cfg, int restarts, std::uint64_t seed);

}  // namespace df2
