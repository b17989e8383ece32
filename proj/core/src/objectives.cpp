#include "df2/objectives.hpp"

#include <cmath>

namespace df2 {

// ---------------------------------------------------------------------------
// FeasibleSet

FeasibleSet FeasibleSet::box(Vec lower, Vec upper) {
  if (lower.size() != upper.size() || lower.size() == 0) throw DimensionError("box bounds must be non-empty and equal length");
  for (Eigen::Index i = 0; i < lower.size(); ++i) {
    if (!(lower[i] < upper[i])) throw ConfigError("box requires lower < upper in every coordinate");
  }
  return FeasibleSet(Box{std::move(lower), std::move(upper)});
}

FeasibleSet FeasibleSet::uniform_box(int dim, double lower, double upper) {
  if (dim < 1) throw ConfigError("box dimension must be >= 1");
  return box(Vec::Constant(dim, lower), Vec::Constant(dim, upper));
}

FeasibleSet FeasibleSet::simplex(int dim, double budget) {
  if (dim < 1) throw ConfigError("simplex dimension must be >= 1");
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ConfigError("simplex budget must be positive");
  return FeasibleSet(BudgetSimplex{dim, budget});
}

int FeasibleSet::dim() const {
  if (is_box()) return static_cast<int>(as_box().lower.size());
  return as_simplex().dim;
}

const Box& FeasibleSet::as_box() const {
  if (!is_box()) throw StateError("feasible set is not a box");
  return std::get<Box>(set_);
}

const BudgetSimplex& FeasibleSet::as_simplex() const {
  if (!is_simplex()) throw StateError("feasible set is not a budget simplex");
  return std::get<BudgetSimplex>(set_);
}

bool FeasibleSet::contains(const Vec& a, double tol) const {
  if (a.size() != dim() || !a.allFinite()) return false;
  if (is_box()) {
    const auto& b = as_box();
    return ((a - b.lower).array() >= -tol).all() && ((b.upper - a).array() >= -tol).all();
  }
  const auto& s = as_simplex();
  return (a.array() >= -tol).all() && a.sum() <= s.budget * (1.0 + tol) + tol;
}

Vec FeasibleSet::center() const {
  if (is_box()) {
    const auto& b = as_box();
    return 0.5 * (b.lower + b.upper);
  }
  const auto& s = as_simplex();
  return Vec::Constant(s.dim, s.budget / s.dim);
}

nlohmann::json FeasibleSet::to_json() const {
  if (is_box()) {
    const auto& b = as_box();
    return {{"type", "box"},
            {"lower", std::vector<double>(b.lower.data(), b.lower.data() + b.lower.size())},
            {"upper", std::vector<double>(b.upper.data(), b.upper.data() + b.upper.size())}};
  }
  const auto& s = as_simplex();
  return {{"type", "simplex"}, {"dim", s.dim}, {"budget", s.budget}};
}

FeasibleSet FeasibleSet::from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "box") {
    const auto lo = j.at("lower").get<std::vector<double>>();
    const auto hi = j.at("upper").get<std::vector<double>>();
    return box(Eigen::Map<const Vec>(lo.data(), static_cast<Eigen::Index>(lo.size())),
               Eigen::Map<const Vec>(hi.data(), static_cast<Eigen::Index>(hi.size())));
  }
  if (type == "simplex") return simplex(j.at("dim").get<int>(), j.at("budget").get<double>());
  throw ConfigError("feasible.type must be 'box' or 'simplex', got '" + type + "'");
}

// ---------------------------------------------------------------------------
// TaskObjective defaults

void TaskObjective::check_dims(const Vec& y, const Vec& a) const {
  if (y.size() != outcome_dim()) {
    throw DimensionError(tag() + ": outcome has " + std::to_string(y.size()) + " entries, expected " +
                         std::to_string(outcome_dim()));
  }
  if (a.size() != decision_dim()) {
    throw DimensionError(tag() + ": decision has " + std::to_string(a.size()) + " entries, expected " +
                         std::to_string(decision_dim()));
  }
  if (!y.allFinite() || !a.allFinite()) throw NumericError(tag() + ": non-finite input");
}

void TaskObjective::cost_rows(const Mat& Y, const Vec& a, Vec& out) const {
  out.resize(Y.rows());
  for (Eigen::Index s = 0; s < Y.rows(); ++s) out[s] = cost(Y.row(s).transpose(), a);
}

Vec TaskObjective::weighted_grad_a_rows(const Mat& Y, const Vec& a, const Vec& w) const {
  Vec g = Vec::Zero(decision_dim());
  for (Eigen::Index s = 0; s < Y.rows(); ++s) {
    if (w[s] != 0.0) g += w[s] * grad_a(Y.row(s).transpose(), a);
  }
  return g;
}

void TaskObjective::accumulate_grad_y_rows(const Mat& Y, const Vec& a, const Vec& coeff, Mat& out) const {
  for (Eigen::Index s = 0; s < Y.rows(); ++s) {
    if (coeff[s] != 0.0) out.row(s) += coeff[s] * grad_y(Y.row(s).transpose(), a).transpose();
  }
}

// ---------------------------------------------------------------------------
// WindParams

void WindParams::validate() const {
  if (!(e_min < e_max)) throw ConfigError("wind: e_min must be < e_max");
  if (!(r_min <= r_max)) throw ConfigError("wind: r_min must be <= r_max");
  for (double v : {price, reserve_cost, deploy_price, up_linear, up_quadratic, down_linear, fixed_penalty}) {
    if (!(v >= 0.0)) throw ConfigError("wind: prices and penalties must be >= 0");
  }
}

nlohmann::json WindParams::to_json() const {
  return {{"P", price},           {"nu", reserve_cost},   {"mu", deploy_price}, {"dP_up1", up_linear},
          {"dP_up2", up_quadratic}, {"dP_down", down_linear}, {"F", fixed_penalty}, {"E_min", e_min},
          {"E_max", e_max},        {"R_min", r_min},       {"R_max", r_max}};
}

WindParams WindParams::from_json(const nlohmann::json& j) {
  WindParams p;
  p.price = j.value("P", p.price);
  p.reserve_cost = j.value("nu", p.reserve_cost);
  p.deploy_price = j.value("mu", p.deploy_price);
  p.up_linear = j.value("dP_up1", p.up_linear);
  p.up_quadratic = j.value("dP_up2", p.up_quadratic);
  p.down_linear = j.value("dP_down", p.down_linear);
  p.fixed_penalty = j.value("F", p.fixed_penalty);
  p.e_min = j.value("E_min", p.e_min);
  p.e_max = j.value("E_max", p.e_max);
  p.r_min = j.value("R_min", p.r_min);
  p.r_max = j.value("R_max", p.r_max);
  p.validate();
  return p;
}

double wind_period_profit(const WindParams& p, double y, double a_e, double a_r) {
  double profit = p.price * y - p.reserve_cost * a_r;
  if (y < a_e - a_r) {
    const double s = a_e - a_r - y;
    profit += -p.up_linear * s - p.up_quadratic * s * s - p.deploy_price * a_r - p.fixed_penalty;
  } else if (y <= a_e) {
    profit += -p.deploy_price * (a_e - y);
  } else {
    profit += -p.down_linear * (y - a_e);
  }
  return profit;
}

namespace {

enum class WindBranch { Over, Middle, Under };

// Branch used for derivatives: ties at y == a_e go to the underbid side.
WindBranch wind_grad_branch(double y, double a_e, double a_r) {
  if (y < a_e - a_r) return WindBranch::Over;
  if (y >= a_e) return WindBranch::Under;
  return WindBranch::Middle;
}

struct WindPartials {
  double d_ae = 0.0;
  double d_ar = 0.0;
  double d_y = 0.0;
};

// Partials of the negated per-period profit.
WindPartials wind_cost_partials(const WindParams& p, double y, double a_e, double a_r) {
  WindPartials d;
  d.d_ar = p.reserve_cost;
  d.d_y = -p.price;
  switch (wind_grad_branch(y, a_e, a_r)) {
    case WindBranch::Over: {
      const double s = a_e - a_r - y;
      const double slope = p.up_linear + 2.0 * p.up_quadratic * s;
      d.d_ae += slope;
      d.d_ar += -slope + p.deploy_price;
      d.d_y += -slope;
      break;
    }
    case WindBranch::Middle:
      d.d_ae += p.deploy_price;
      d.d_y += -p.deploy_price;
      break;
    case WindBranch::Under:
      d.d_ae += -p.down_linear;
      d.d_y += p.down_linear;
      break;
  }
  return d;
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

// ---------------------------------------------------------------------------
// Objective

Objective::Objective(Kind kind) : kind_(std::move(kind)), feasible_(FeasibleSet::uniform_box(1, 0.0, 1.0)) {
  std::visit(Overloaded{
                 [this](const SyntheticConvex& k) {
                   if (k.dim < 1) throw ConfigError("synthetic dim must be >= 1");
                   decision_dim_ = outcome_dim_ = k.dim;
                   feasible_ = FeasibleSet::uniform_box(k.dim, -1.0, 1.0);
                 },
                 [this](const SyntheticNonconvex& k) {
                   if (k.dim < 1) throw ConfigError("synthetic dim must be >= 1");
                   decision_dim_ = outcome_dim_ = k.dim;
                   feasible_ = FeasibleSet::uniform_box(k.dim, -2.0, 2.0);
                 },
                 [this](const WindBidding& k) {
                   if (k.horizon < 1) throw ConfigError("wind horizon must be >= 1");
                   k.params.validate();
                   outcome_dim_ = k.horizon;
                   if (k.reserve_pinned) {
                     decision_dim_ = k.horizon;
                     feasible_ = FeasibleSet::uniform_box(k.horizon, k.params.e_min, k.params.e_max);
                   } else {
                     decision_dim_ = 2 * k.horizon;
                     Vec lo(decision_dim_), hi(decision_dim_);
                     lo << Vec::Constant(k.horizon, k.params.e_min), Vec::Constant(k.horizon, k.params.r_min);
                     hi << Vec::Constant(k.horizon, k.params.e_max), Vec::Constant(k.horizon, k.params.r_max);
                     if (k.params.r_min == k.params.r_max) hi.tail(k.horizon).array() += 1e-12;
                     feasible_ = FeasibleSet::box(lo, hi);
                   }
                 },
                 [this](const Inventory& k) {
                   if (k.horizon < 1) throw ConfigError("inventory horizon must be >= 1");
                   decision_dim_ = outcome_dim_ = k.horizon;
                   feasible_ = FeasibleSet::uniform_box(k.horizon, 0.0, 3.0);
                 },
             },
             kind_);
}

std::string Objective::tag() const {
  return std::visit(Overloaded{
                        [](const SyntheticConvex&) { return std::string("synthetic-convex"); },
                        [](const SyntheticNonconvex&) { return std::string("synthetic-nonconvex"); },
                        [](const WindBidding& k) { return std::string(k.reserve_pinned ? "wind-reduced" : "wind"); },
                        [](const Inventory&) { return std::string("inventory"); },
                    },
                    kind_);
}

Sense Objective::native_sense() const {
  return std::holds_alternative<WindBidding>(kind_) ? Sense::Maximize : Sense::Minimize;
}

double Objective::cost(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  return std::visit(Overloaded{
                        [&](const SyntheticConvex&) {
                          double c = 0.0;
                          for (Eigen::Index i = 0; i < y.size(); ++i) {
                            const double up = std::max(y[i] - a[i], 0.0);
                            const double over = std::max(a[i] - y[i], 0.0);
                            c += 5.0 * up + 20.0 * over + 0.5 * up * up + 0.2 * over * over;
                          }
                          return c;
                        },
                        [&](const SyntheticNonconvex&) {
                          double c = 0.0;
                          for (Eigen::Index i = 0; i < y.size(); ++i) {
                            const double up = std::max(y[i] - a[i], 0.0);
                            const double over = std::max(a[i] - y[i], 0.0);
                            c += 10.0 * up * up + 2.0 * over * over + 4.0 * a[i] * a[i] * a[i];
                          }
                          return c;
                        },
                        [&](const WindBidding& k) {
                          double profit = 0.0;
                          for (int i = 0; i < k.horizon; ++i) {
                            const double a_r = k.reserve_pinned ? k.params.r_min : a[k.horizon + i];
                            profit += wind_period_profit(k.params, y[i], a[i], a_r);
                          }
                          return -profit;
                        },
                        [&](const Inventory&) {
                          double c = 0.0;
                          for (Eigen::Index i = 0; i < y.size(); ++i) {
                            const double u = y[i] - a[i];
                            c += 20.0 * std::max(u, 0.0) + 5.0 * std::max(-u, 0.0) + u * u;
                          }
                          return c;
                        },
                    },
                    kind_);
}

namespace {

// d cost / d a for the separable families, as a function of u = y - a and a.
double separable_grad_a(const Objective::Kind& kind, double u, double a) {
  if (std::holds_alternative<SyntheticConvex>(kind)) return u >= 0.0 ? -5.0 - u : 20.0 - 0.4 * u;
  if (std::holds_alternative<SyntheticNonconvex>(kind)) return (u >= 0.0 ? -20.0 * u : -4.0 * u) + 12.0 * a * a;
  return u >= 0.0 ? -20.0 - 2.0 * u : 5.0 - 2.0 * u;  // inventory
}

// d cost / d y; for the separable families this only sees the u terms.
double separable_grad_y(const Objective::Kind& kind, double u) {
  if (std::holds_alternative<SyntheticConvex>(kind)) return u >= 0.0 ? 5.0 + u : -20.0 + 0.4 * u;
  if (std::holds_alternative<SyntheticNonconvex>(kind)) return u >= 0.0 ? 20.0 * u : 4.0 * u;
  return u >= 0.0 ? 20.0 + 2.0 * u : -5.0 + 2.0 * u;
}

}  // namespace

Vec Objective::grad_a(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  Vec g = Vec::Zero(decision_dim_);
  if (const auto* w = std::get_if<WindBidding>(&kind_)) {
    for (int i = 0; i < w->horizon; ++i) {
      const double a_r = w->reserve_pinned ? w->params.r_min : a[w->horizon + i];
      const auto d = wind_cost_partials(w->params, y[i], a[i], a_r);
      g[i] = d.d_ae;
      if (!w->reserve_pinned) g[w->horizon + i] = d.d_ar;
    }
    return g;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i) g[i] = separable_grad_a(kind_, y[i] - a[i], a[i]);
  return g;
}

Vec Objective::grad_y(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  Vec g = Vec::Zero(outcome_dim_);
  if (const auto* w = std::get_if<WindBidding>(&kind_)) {
    for (int i = 0; i < w->horizon; ++i) {
      const double a_r = w->reserve_pinned ? w->params.r_min : a[w->horizon + i];
      g[i] = wind_cost_partials(w->params, y[i], a[i], a_r).d_y;
    }
    return g;
  }
  for (Eigen::Index i = 0; i < y.size(); ++i) g[i] = separable_grad_y(kind_, y[i] - a[i]);
  return g;
}

namespace {

// Per-coordinate cost a1 u+ + a2 (-u)+ + q1 u+^2 + q2 (-u)+^2 + c a^3.
struct HingeQuadratic {
  double a1, a2, q1, q2, c;
};

HingeQuadratic hinge_coefficients(const Objective::Kind& kind) {
  if (std::holds_alternative<SyntheticConvex>(kind)) return {5.0, 20.0, 0.5, 0.2, 0.0};
  if (std::holds_alternative<SyntheticNonconvex>(kind)) return {0.0, 0.0, 10.0, 2.0, 4.0};
  return {20.0, 5.0, 1.0, 1.0, 0.0};
}

}  // namespace

void Objective::cost_rows(const Mat& Y, const Vec& a, Vec& out) const {
  if (Y.cols() != outcome_dim_ || a.size() != decision_dim_) throw DimensionError(tag() + ": cost_rows shape mismatch");
  if (std::holds_alternative<WindBidding>(kind_)) {
    TaskObjective::cost_rows(Y, a, out);
    return;
  }
  const HingeQuadratic h = hinge_coefficients(kind_);
  const Eigen::Index n = Y.rows();
  out.setConstant(n, h.c * a.array().cube().sum());
  double* o = out.data();
  for (Eigen::Index i = 0; i < Y.cols(); ++i) {
    const double* y = Y.col(i).data();
    const double ai = a[i];
    for (Eigen::Index s = 0; s < n; ++s) {
      const double u = y[s] - ai;
      const double up = std::max(u, 0.0);
      const double dn = std::max(-u, 0.0);
      o[s] += (h.a1 + h.q1 * up) * up + (h.a2 + h.q2 * dn) * dn;
    }
  }
}

Vec Objective::weighted_grad_a_rows(const Mat& Y, const Vec& a, const Vec& w) const {
  if (Y.cols() != outcome_dim_ || a.size() != decision_dim_ || w.size() != Y.rows()) {
    throw DimensionError(tag() + ": weighted_grad_a_rows shape mismatch");
  }
  if (std::holds_alternative<WindBidding>(kind_)) return TaskObjective::weighted_grad_a_rows(Y, a, w);
  const HingeQuadratic h = hinge_coefficients(kind_);
  const Eigen::Index n = Y.rows();
  const double wsum = w.sum();
  Vec g(decision_dim_);
  for (Eigen::Index i = 0; i < Y.cols(); ++i) {
    const double* y = Y.col(i).data();
    const double ai = a[i];
    double acc = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
      const double u = y[s] - ai;
      const double step = u >= 0.0 ? h.a1 : -h.a2;
      acc -= w[s] * (step + 2.0 * (h.q1 * std::max(u, 0.0) - h.q2 * std::max(-u, 0.0)));
    }
    g[i] = acc + 3.0 * h.c * ai * ai * wsum;
  }
  return g;
}

void Objective::accumulate_grad_y_rows(const Mat& Y, const Vec& a, const Vec& coeff, Mat& out) const {
  if (Y.cols() != outcome_dim_ || a.size() != decision_dim_ || coeff.size() != Y.rows() || out.rows() != Y.rows() ||
      out.cols() != Y.cols()) {
    throw DimensionError(tag() + ": accumulate_grad_y_rows shape mismatch");
  }
  if (std::holds_alternative<WindBidding>(kind_)) {
    TaskObjective::accumulate_grad_y_rows(Y, a, coeff, out);
    return;
  }
  const HingeQuadratic h = hinge_coefficients(kind_);
  const Eigen::Index n = Y.rows();
  for (Eigen::Index i = 0; i < Y.cols(); ++i) {
    const double* y = Y.col(i).data();
    double* o = out.col(i).data();
    const double ai = a[i];
    for (Eigen::Index s = 0; s < n; ++s) {
      const double u = y[s] - ai;
      const double step = u >= 0.0 ? h.a1 : -h.a2;
      o[s] += coeff[s] * (step + 2.0 * (h.q1 * std::max(u, 0.0) - h.q2 * std::max(-u, 0.0)));
    }
  }
}

nlohmann::json Objective::to_json() const {
  return std::visit(Overloaded{
                        [](const SyntheticConvex& k) { return nlohmann::json{{"type", "synthetic-convex"}, {"dim", k.dim}}; },
                        [](const SyntheticNonconvex& k) {
                          return nlohmann::json{{"type", "synthetic-nonconvex"}, {"dim", k.dim}};
                        },
                        [](const WindBidding& k) {
                          return nlohmann::json{{"type", "wind"},
                                                {"horizon", k.horizon},
                                                {"reserve_pinned", k.reserve_pinned},
                                                {"params", k.params.to_json()}};
                        },
                        [](const Inventory& k) { return nlohmann::json{{"type", "inventory"}, {"horizon", k.horizon}}; },
                    },
                    kind_);
}

Objective Objective::from_json(const nlohmann::json& j) {
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "synthetic-convex") return synthetic_convex(j.value("dim", 2));
    if (type == "synthetic-nonconvex") return synthetic_nonconvex(j.value("dim", 2));
    if (type == "inventory") return inventory(j.value("horizon", 7));
    if (type == "wind") {
      WindBidding k;
      k.horizon = j.value("horizon", 12);
      k.reserve_pinned = j.value("reserve_pinned", false);
      if (j.contains("params")) k.params = WindParams::from_json(j["params"]);
      return Objective(k);
    }
    throw ConfigError("objective.type: unknown objective '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("objective: ") + e.what());
  }
}

Objective wind_reduce_reserve(const Objective& wind) {
  const auto* k = std::get_if<WindBidding>(&wind.kind());
  if (!k) throw ConfigError("wind_reduce_reserve needs a wind objective");
  WindBidding reduced = *k;
  reduced.reserve_pinned = true;
  return Objective(reduced);
}

}  // namespace df2
