#pragma once

#include <memory>
#include <string>
#include <variant>

#include "df2/learncore.hpp"

namespace df2 {

struct Box {
  Vec lower;
  Vec upper;
};

struct BudgetSimplex {
  int dim = 1;
  double budget = 1.0;
};

/// The decision constraint set C. Boxes require lower < upper coordinatewise;
/// simplices are {a >= 0, sum(a) <= budget} and samplers/solvers keep sum == budget.
class FeasibleSet {
 public:
  static FeasibleSet box(Vec lower, Vec upper);
  static FeasibleSet uniform_box(int dim, double lower, double upper);
  static FeasibleSet simplex(int dim, double budget);

  int dim() const;
  bool is_box() const { return std::holds_alternative<Box>(set_); }
  bool is_simplex() const { return std::holds_alternative<BudgetSimplex>(set_); }
  const Box& as_box() const;
  const BudgetSimplex& as_simplex() const;
  bool contains(const Vec& a, double tol = 1e-10) const;
  /// Box center or the uniform allocation budget/dim.
  Vec center() const;

  nlohmann::json to_json() const;
  static FeasibleSet from_json(const nlohmann::json& j);

 private:
  explicit FeasibleSet(std::variant<Box, BudgetSimplex> s) : set_(std::move(s)) {}
  std::variant<Box, BudgetSimplex> set_;
};

enum class Sense { Minimize, Maximize };

/// A cost f(y, a) in minimization form, with gradients in both arguments.
///
/// The *_rows methods evaluate many outcomes against one decision; the
/// default implementations loop, separable objectives override them with
/// vectorized kernels since the surrogate calls them S times per action.
class TaskObjective {
 public:
  virtual ~TaskObjective() = default;

  virtual std::string tag() const = 0;
  virtual int decision_dim() const = 0;
  virtual int outcome_dim() const = 0;
  virtual const FeasibleSet& feasible() const = 0;
  /// Sense of the underlying task; cost() is always the minimization form.
  virtual Sense native_sense() const { return Sense::Minimize; }

  virtual double cost(const Vec& y, const Vec& a) const = 0;
  virtual Vec grad_a(const Vec& y, const Vec& a) const = 0;
  virtual Vec grad_y(const Vec& y, const Vec& a) const = 0;

  /// out[s] = f(Y.row(s), a)
  virtual void cost_rows(const Mat& Y, const Vec& a, Vec& out) const;
  /// returns sum_s w[s] * grad_a f(Y.row(s), a)
  virtual Vec weighted_grad_a_rows(const Mat& Y, const Vec& a, const Vec& w) const;
  /// out.row(s) += coeff[s] * grad_y f(Y.row(s), a)
  virtual void accumulate_grad_y_rows(const Mat& Y, const Vec& a, const Vec& coeff, Mat& out) const;

  virtual nlohmann::json to_json() const = 0;

 protected:
  void check_dims(const Vec& y, const Vec& a) const;
};

using ObjectivePtr = std::shared_ptr<const TaskObjective>;

/// Market constants for the wind bidding profit.
struct WindParams {
  double price = 100.0;          // P
  double reserve_cost = 20.0;    // nu
  double deploy_price = 110.0;   // mu
  double up_linear = 200.0;      // dP_up1
  double up_quadratic = 100.0;   // dP_up2
  double down_linear = 20.0;     // dP_down
  double fixed_penalty = 10.0;   // F
  double e_min = 0.0;
  double e_max = 4.0;
  double r_min = 0.15;
  double r_max = 4.0;

  void validate() const;
  nlohmann::json to_json() const;
  static WindParams from_json(const nlohmann::json& j);
};

struct SyntheticConvex {
  int dim = 2;
};
struct SyntheticNonconvex {
  int dim = 2;
};
struct WindBidding {
  WindParams params;
  int horizon = 12;
  bool reserve_pinned = false;  // true: decision is a_E only, a_R == r_min
};
struct Inventory {
  int horizon = 7;
};

/// The closed-form cost families.
///
/// SyntheticConvex, per coordinate with u = y - a:
///   5 u+ + 20 (-u)+ + 0.5 u+^2 + 0.2 (-u)+^2,     a in [-1, 1]
/// SyntheticNonconvex:
///   10 u+^2 + 2 (-u)+^2 + 4 a^3,                  a in [-2, 2]
/// Inventory:
///   20 u+ + 5 (-u)+ + u^2,                        a in [0, 3]
/// WindBidding: negated three-segment profit over [a_E, a_R].
///
/// At hinge kinks (u == 0) gradients take the u > 0 branch.
class Objective final : public TaskObjective {
 public:
  using Kind = std::variant<SyntheticConvex, SyntheticNonconvex, WindBidding, Inventory>;

  explicit Objective(Kind kind);

  static Objective synthetic_convex(int dim = 2) { return Objective(SyntheticConvex{dim}); }
  static Objective synthetic_nonconvex(int dim = 2) { return Objective(SyntheticNonconvex{dim}); }
  static Objective wind(const WindParams& p = {}, int horizon = 12) { return Objective(WindBidding{p, horizon, false}); }
  static Objective inventory(int horizon = 7) { return Objective(Inventory{horizon}); }

  const Kind& kind() const { return kind_; }

  std::string tag() const override;
  int decision_dim() const override { return decision_dim_; }
  int outcome_dim() const override { return outcome_dim_; }
  const FeasibleSet& feasible() const override { return feasible_; }
  Sense native_sense() const override;

  double cost(const Vec& y, const Vec& a) const override;
  Vec grad_a(const Vec& y, const Vec& a) const override;
  Vec grad_y(const Vec& y, const Vec& a) const override;

  void cost_rows(const Mat& Y, const Vec& a, Vec& out) const override;
  Vec weighted_grad_a_rows(const Mat& Y, const Vec& a, const Vec& w) const override;
  void accumulate_grad_y_rows(const Mat& Y, const Vec& a, const Vec& coeff, Mat& out) const override;

  nlohmann::json to_json() const override;
  static Objective from_json(const nlohmann::json& j);

 private:
  Kind kind_;
  int decision_dim_ = 0;
  int outcome_dim_ = 0;
  FeasibleSet feasible_;
};

/// Wind objective over a_E only, with every a_R pinned at r_min.
Objective wind_reduce_reserve(const Objective& wind);

/// Profit of one wind period (not negated).
double wind_period_profit(const WindParams& p, double y, double a_e, double a_r);

}  // namespace df2
