#include "df2/solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "df2/samplers.hpp"

namespace df2 {

Vec project_box(const Vec& a, const Box& box) {
  if (a.size() != box.lower.size()) throw DimensionError("project_box: dim mismatch");
  return a.cwiseMax(box.lower).cwiseMin(box.upper);
}

namespace {

void check_cfg(const PgdConfig& cfg) {
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ConfigError("solver: lr must be > 0");
  if (cfg.iters < 0) throw ConfigError("solver: iters must be >= 0");
}

Vec checked_grad(const GradFn& grad, const Vec& a, int iter) {
  Vec gr = grad(a);
  if (gr.size() != a.size()) throw DimensionError("solver: gradient dim mismatch");
  if (!gr.allFinite()) throw NumericError("solver: non-finite gradient at iteration " + std::to_string(iter));
  return gr;
}

void track(SolveResult& r, const Vec& a, double v) {
  if (v < r.value) {
    r.value = v;
    r.a = a;
  }
  r.trace.push_back(r.value);
}

}  // namespace

SolveResult pgd_minimize(const ValueFn& value, const GradFn& grad, const Box& box, const PgdConfig& cfg,
                         std::optional<Vec> a0) {
  check_cfg(cfg);
  Vec a = a0 ? project_box(*a0, box) : Vec(0.5 * (box.lower + box.upper));
  SolveResult r{a, value(a), {}};
  if (!std::isfinite(r.value)) throw NumericError("pgd: non-finite value at the start point");
  r.trace.push_back(r.value);
  const AdamConfig acfg{cfg.lr, 0.9, 0.999, 1e-8};
  Vec m = Vec::Zero(a.size());
  Vec v = Vec::Zero(a.size());
  for (int t = 1; t <= cfg.iters; ++t) {
    const Vec gr = checked_grad(grad, a, t);
    m = acfg.beta1 * m + (1.0 - acfg.beta1) * gr;
    v = acfg.beta2 * v + (1.0 - acfg.beta2) * gr.cwiseAbs2();
    const double c1 = 1.0 - std::pow(acfg.beta1, t);
    const double c2 = 1.0 - std::pow(acfg.beta2, t);
    const Vec step = (m / c1).array() / ((v / c2).array().sqrt() + acfg.epsilon);
    a = project_box(a - cfg.lr * step, box);
    track(r, a, value(a));
  }
  return r;
}

SolveResult mirror_descent_simplex(const ValueFn& value, const GradFn& grad, double budget, const PgdConfig& cfg,
                                   std::optional<Vec> a0) {
  check_cfg(cfg);
  if (!(budget > 0.0)) throw ConfigError("mirror descent: budget must be > 0");
  if (!a0) throw ConfigError("mirror descent: a start point is required");
  Vec a = *a0;
  if (a.size() < 1) throw DimensionError("mirror descent: empty start point");
  if (!(a.array() > 0.0).all()) throw ConfigError("mirror descent: start point has a zero or negative coordinate");
  if (std::abs(a.sum() - budget) > 1e-9 * std::max(1.0, budget)) {
    throw ConfigError("mirror descent: start point must sum to the budget");
  }
  SolveResult r{a, value(a), {}};
  r.trace.push_back(r.value);
  for (int t = 1; t <= cfg.iters; ++t) {
    const Vec gr = checked_grad(grad, a, t);
    // log-domain update, shifted by the max exponent
    Vec logw = a.array().log() - cfg.lr * gr.array();
    const double shift = logw.maxCoeff();
    Vec w = (logw.array() - shift).exp();
    a = budget * w / w.sum();
    track(r, a, value(a));
  }
  return r;
}

SolveResult minimize_over(const FeasibleSet& set, const ValueFn& value, const GradFn& grad, const PgdConfig& cfg,
                          std::optional<Vec> a0) {
  if (!a0 && cfg.restarts > 1) return multistart_minimize(set, value, grad, cfg, cfg.restarts, cfg.seed);
  if (set.is_box()) return pgd_minimize(value, grad, set.as_box(), cfg, std::move(a0));
  const auto& s = set.as_simplex();
  return mirror_descent_simplex(value, grad, s.budget, cfg, a0 ? std::move(a0) : std::optional<Vec>(set.center()));
}

SolveResult multistart_minimize(const FeasibleSet& set, const ValueFn& value, const GradFn& grad,
                                const PgdConfig& cfg, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw ConfigError("solver: restarts must be >= 1");
  Rng rng(seed);
  std::vector<Vec> candidates{set.center()};
  if (set.is_box() && set.dim() <= kScreenCornerDims) {
    const Box& box = set.as_box();
    for (long mask = 0; mask < (1L << set.dim()); ++mask) {
      Vec c(set.dim());
      for (int i = 0; i < set.dim(); ++i) c[i] = (mask >> i) & 1 ? box.upper[i] : box.lower[i];
      candidates.push_back(std::move(c));
    }
  }
  const Mat draws = sample_feasible(set, kScreenDraws, rng);
  for (Eigen::Index r = 0; r < draws.rows(); ++r) candidates.emplace_back(draws.row(r).transpose());
  std::vector<std::pair<double, std::size_t>> screened;
  screened.reserve(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) screened.emplace_back(value(candidates[c]), c);
  std::sort(screened.begin(), screened.end());

  // Greedy pick of well separated low points so that the restarts cover
  // different basins; the next best points fill any remaining slots.
  const Vec span = set.is_box() ? Vec(set.as_box().upper - set.as_box().lower)
                                : Vec::Constant(set.dim(), set.as_simplex().budget);
  const double min_sep = 0.25 * span.norm();
  const auto wanted = static_cast<std::size_t>(restarts);
  std::vector<std::size_t> starts;
  std::vector<bool> used(screened.size(), false);
  for (std::size_t k = 0; k < screened.size() && starts.size() < wanted; ++k) {
    const Vec& c = candidates[screened[k].second];
    bool far = true;
    for (std::size_t s : starts) far = far && (candidates[s] - c).norm() >= min_sep;
    if (far) {
      starts.push_back(screened[k].second);
      used[k] = true;
    }
  }
  for (std::size_t k = 0; k < screened.size() && starts.size() < wanted; ++k) {
    if (!used[k]) starts.push_back(screened[k].second);
  }

  PgdConfig single = cfg;
  single.restarts = 1;
  SolveResult best;
  best.value = std::numeric_limits<double>::infinity();
  for (std::size_t idx : starts) {
    Vec a0 = candidates[idx];
    if (set.is_simplex()) {
      // mirror descent needs a strictly positive start
      a0 = (a0.array() + 1e-3 * set.as_simplex().budget).matrix();
      a0 *= set.as_simplex().budget / a0.sum();
    }
    SolveResult res = minimize_over(set, value, grad, single, a0);
    if (res.value < best.value) best = std::move(res);
  }
  return best;
}

}  // namespace df2
