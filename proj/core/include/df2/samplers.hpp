#pragma once

#include <cstdint>
#include <random>

#include "df2/objectives.hpp"

namespace df2 {

using Rng = std::mt19937_64;

/// Each coordinate i.i.d. uniform in [lower, upper].
Mat sample_box(const Box& box, int n, std::uint64_t seed);
Mat sample_box(const Box& box, int n, Rng& rng);

/// Rows are budget * Dirichlet(1, ..., 1), renormalized to sum to budget.
Mat sample_simplex(const BudgetSimplex& simplex, int n, std::uint64_t seed);
Mat sample_simplex(const BudgetSimplex& simplex, int n, Rng& rng);

/// Box sampler for boxes, Dirichlet sampler for budget simplices.
Mat sample_feasible(const FeasibleSet& set, int n, Rng& rng);

enum class LpStatus { Optimal, Unbounded, Infeasible };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  double value = 0.0;
  Vec x;
};

/// max c'x subject to Gx <= h with x free; dense two-phase simplex with
/// Bland's rule. Meant for the small systems used to bound feasible sets.
LpResult lp_maximize(const Vec& c, const Mat& G, const Vec& h);

/// Bounding box of {a : Ga <= h} from 2m linear programs.
/// Throws ConfigError if the polyhedron is empty or unbounded in some coordinate.
Box outer_box_of_linear(const Mat& G, const Vec& h);

struct HitAndRunOptions {
  int burn_in = 0;
  int thin = 1;
};

/// Hit-and-run chain over {a : Ga <= h}: uniform direction on the sphere,
/// uniform step along the feasible chord. a0 must be strictly interior.
Mat hit_and_run(const Mat& G, const Vec& h, const Vec& a0, int n, std::uint64_t seed,
                const HitAndRunOptions& opts = {});

}  // namespace df2
