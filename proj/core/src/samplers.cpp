#include "df2/samplers.hpp"

#include <cmath>
#include <limits>

namespace df2 {

Mat sample_box(const Box& box, int n, Rng& rng) {
  if (n <= 0) throw ConfigError("sample_box: n must be > 0");
  const auto m = box.lower.size();
  Mat out(n, m);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < n; ++r) {
    for (Eigen::Index i = 0; i < m; ++i) out(r, i) = box.lower[i] + (box.upper[i] - box.lower[i]) * u(rng);
  }
  return out;
}

Mat sample_box(const Box& box, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_box(box, n, rng);
}

Mat sample_simplex(const BudgetSimplex& simplex, int n, Rng& rng) {
  if (n <= 0) throw ConfigError("sample_simplex: n must be > 0");
  if (simplex.dim < 1 || !(simplex.budget > 0)) throw ConfigError("sample_simplex: invalid simplex");
  Mat out(n, simplex.dim);
  std::exponential_distribution<double> e(1.0);
  for (int r = 0; r < n; ++r) {
    for (int i = 0; i < simplex.dim; ++i) out(r, i) = e(rng);
    const double total = out.row(r).sum();
    out.row(r) *= simplex.budget / total;
    // push the rounding residue into the largest entry
    Eigen::Index big = 0;
    out.row(r).maxCoeff(&big);
    out(r, big) += simplex.budget - out.row(r).sum();
  }
  return out;
}

Mat sample_simplex(const BudgetSimplex& simplex, int n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_simplex(simplex, n, rng);
}

Mat sample_feasible(const FeasibleSet& set, int n, Rng& rng) {
  if (set.is_box()) return sample_box(set.as_box(), n, rng);
  return sample_simplex(set.as_simplex(), n, rng);
}

// ---------------------------------------------------------------------------
// Dense two-phase simplex.

namespace {

constexpr double kPivotTol = 1e-11;

struct Tableau {
  Mat t;                   // rows 0..r-1 constraints, row r objective (reduced costs)
  std::vector<int> basis;  // basic column per constraint row
};

void pivot(Tableau& tb, int row, int col) {
  tb.t.row(row) /= tb.t(row, col);
  for (Eigen::Index i = 0; i < tb.t.rows(); ++i) {
    if (i != row && tb.t(i, col) != 0.0) tb.t.row(i) -= tb.t(i, col) * tb.t.row(row);
  }
  tb.basis[static_cast<std::size_t>(row)] = col;
}

// Maximizes with objective row holding -c (so negative entries can improve).
// Columns >= active_cols are never entered. Returns false if unbounded.
bool run_simplex(Tableau& tb, int active_cols) {
  const auto rows = static_cast<int>(tb.t.rows()) - 1;
  const auto rhs = tb.t.cols() - 1;
  for (int iter = 0; iter < 10000; ++iter) {
    int enter = -1;
    for (int c = 0; c < active_cols; ++c) {
      if (tb.t(rows, c) < -kPivotTol) {
        enter = c;
        break;
      }
    }
    if (enter < 0) return true;
    int leave = -1;
    double best = std::numeric_limits<double>::infinity();
    for (int r = 0; r < rows; ++r) {
      if (tb.t(r, enter) > kPivotTol) {
        const double ratio = tb.t(r, rhs) / tb.t(r, enter);
        if (ratio < best - 1e-15 ||
            (std::abs(ratio - best) <= 1e-15 && leave >= 0 && tb.basis[r] < tb.basis[leave])) {
          best = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) return false;
    pivot(tb, leave, enter);
  }
  throw NumericError("lp_maximize: iteration limit reached");
}

}  // namespace

LpResult lp_maximize(const Vec& c, const Mat& G, const Vec& h) {
  const auto m = static_cast<int>(G.cols());
  const auto r = static_cast<int>(G.rows());
  if (c.size() != m || h.size() != r) throw DimensionError("lp_maximize: shape mismatch");
  if (!G.allFinite() || !h.allFinite() || !c.allFinite()) throw NumericError("lp_maximize: non-finite input");

  // columns: x+ (m) | x- (m) | slack (r) | artificial (r) | rhs
  const int n_struct = 2 * m + r;
  Tableau tb;
  tb.t = Mat::Zero(r + 1, n_struct + r + 1);
  tb.basis.assign(static_cast<std::size_t>(r), -1);
  const int rhs = n_struct + r;
  int n_art = 0;
  for (int i = 0; i < r; ++i) {
    const double sign = h[i] < 0 ? -1.0 : 1.0;
    tb.t.block(i, 0, 1, m) = sign * G.row(i);
    tb.t.block(i, m, 1, m) = -sign * G.row(i);
    tb.t(i, 2 * m + i) = sign;
    tb.t(i, rhs) = sign * h[i];
    if (sign > 0) {
      tb.basis[i] = 2 * m + i;
    } else {
      tb.t(i, n_struct + i) = 1.0;
      tb.basis[i] = n_struct + i;
      ++n_art;
    }
  }

  if (n_art > 0) {
    // phase 1: maximize -sum(artificials)
    for (int i = 0; i < r; ++i) {
      if (tb.basis[i] >= n_struct) tb.t.row(r) -= tb.t.row(i);
    }
    for (int i = 0; i < r; ++i) {
      if (tb.basis[i] >= n_struct) tb.t(r, tb.basis[i]) = 0.0;
    }
    run_simplex(tb, n_struct);
    // row r holds the phase-1 value -sum(artificials)
    if (tb.t(r, rhs) < -1e-9 * (1.0 + h.cwiseAbs().maxCoeff())) return {LpStatus::Infeasible, 0.0, {}};
    // drive remaining (zero-level) artificials out of the basis
    for (int i = 0; i < r; ++i) {
      if (tb.basis[i] < n_struct) continue;
      for (int col = 0; col < n_struct; ++col) {
        if (std::abs(tb.t(i, col)) > kPivotTol) {
          pivot(tb, i, col);
          break;
        }
      }
    }
  }

  // phase 2 objective row: -c on x+, +c on x-, then price out basic columns
  tb.t.row(r).setZero();
  tb.t.block(r, 0, 1, m) = -c.transpose();
  tb.t.block(r, m, 1, m) = c.transpose();
  for (int i = 0; i < r; ++i) {
    const int b = tb.basis[i];
    if (b < n_struct && tb.t(r, b) != 0.0) tb.t.row(r) -= tb.t(r, b) * tb.t.row(i);
  }
  if (!run_simplex(tb, n_struct)) return {LpStatus::Unbounded, 0.0, {}};

  Vec x = Vec::Zero(m);
  for (int i = 0; i < r; ++i) {
    const int b = tb.basis[i];
    if (b < m) x[b] += tb.t(i, rhs);
    else if (b < 2 * m) x[b - m] -= tb.t(i, rhs);
  }
  return {LpStatus::Optimal, c.dot(x), x};
}

Box outer_box_of_linear(const Mat& G, const Vec& h) {
  const auto m = G.cols();
  if (m == 0) throw DimensionError("outer_box_of_linear: zero-dimensional system");
  Box box{Vec(m), Vec(m)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (double sign : {1.0, -1.0}) {
      const auto res = lp_maximize(sign * Vec::Unit(m, i), G, h);
      if (res.status == LpStatus::Infeasible) throw ConfigError("outer_box_of_linear: polyhedron is empty");
      if (res.status == LpStatus::Unbounded) {
        throw ConfigError("outer_box_of_linear: coordinate " + std::to_string(i) + " is unbounded");
      }
      if (sign > 0) box.upper[i] = res.value;
      else box.lower[i] = -res.value;
    }
  }
  return box;
}

Mat hit_and_run(const Mat& G, const Vec& h, const Vec& a0, int n, std::uint64_t seed, const HitAndRunOptions& opts) {
  const auto m = G.cols();
  if (a0.size() != m || h.size() != G.rows()) throw DimensionError("hit_and_run: shape mismatch");
  if (n < 0 || opts.burn_in < 0 || opts.thin < 1) throw ConfigError("hit_and_run: invalid n/burn_in/thin");
  if (!((h - G * a0).array() > 0.0).all()) throw ConfigError("hit_and_run: starting point is not strictly interior");
  Mat out(n, m);
  if (n == 0) return out;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec a = a0;
  Vec slack = h - G * a;
  Vec dir(m);
  const long total = opts.burn_in + static_cast<long>(n) * opts.thin;
  int kept = 0;
  for (long step = 0; step < total; ++step) {
    for (Eigen::Index i = 0; i < m; ++i) dir[i] = normal(rng);
    dir.normalize();
    const Vec gd = G * dir;
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (Eigen::Index r = 0; r < gd.size(); ++r) {
      if (gd[r] > 0) hi = std::min(hi, slack[r] / gd[r]);
      else if (gd[r] < 0) lo = std::max(lo, slack[r] / gd[r]);
    }
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ConfigError("hit_and_run: polyhedron is unbounded");
    const double t = lo + (hi - lo) * unit(rng);
    a += t * dir;
    slack -= t * gd;
    // guard against drift out of the set from accumulated round-off
    if ((slack.array() < 0.0).any()) slack = h - G * a;
    if (step >= opts.burn_in && (step - opts.burn_in) % opts.thin == opts.thin - 1) out.row(kept++) = a.transpose();
  }
  return out;
}

}  // namespace df2
