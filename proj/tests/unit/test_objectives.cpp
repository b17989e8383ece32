#include <gtest/gtest.h>

#include "df2/objectives.hpp"
#include "test_util.hpp"

using namespace df2;
using namespace df2::testing;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v1(double a) { return Vec::Constant(1, a); }

// Independent per-dimension formulas, written out from the task definitions.
double convex_dim(double y, double a) {
  const double u = y - a;
  return u >= 0 ? 5 * u + 0.5 * u * u : 20 * (-u) + 0.2 * u * u;
}
double nonconvex_dim(double y, double a) {
  const double u = y - a;
  return (u >= 0 ? 10 * u * u : 2 * u * u) + 4 * a * a * a;
}
double inventory_dim(double y, double a) {
  const double u = y - a;
  return (u >= 0 ? 20 * u : -5 * u) + u * u;
}

// True when every coordinate is at least `gap` away from every kink.
bool away_from_kinks(const Objective& obj, const Vec& y, const Vec& a, double gap) {
  if (const auto* w = std::get_if<WindBidding>(&obj.kind())) {
    for (int i = 0; i < w->horizon; ++i) {
      const double a_r = w->reserve_pinned ? w->params.r_min : a[w->horizon + i];
      if (std::abs(y[i] - a[i]) < gap || std::abs(y[i] - (a[i] - a_r)) < gap) return false;
    }
    return true;
  }
  return ((y - a).cwiseAbs().array() >= gap).all();
}

std::vector<Objective> all_objectives() {
  return {Objective::synthetic_convex(), Objective::synthetic_nonconvex(), Objective::inventory(),
          Objective::wind(), wind_reduce_reserve(Objective::wind())};
}

// Draw (y, a) in a range that exercises every branch.
std::pair<Vec, Vec> random_point(const Objective& obj, std::mt19937_64& rng) {
  const auto& box = obj.feasible().as_box();
  Vec a(obj.decision_dim());
  for (int i = 0; i < a.size(); ++i) {
    std::uniform_real_distribution<double> u(box.lower[i], box.upper[i]);
    a[i] = u(rng);
  }
  if (std::holds_alternative<WindBidding>(obj.kind())) return {random_vec(obj.outcome_dim(), rng, 0.0, 4.0), a};
  return {random_vec(obj.outcome_dim(), rng, box.lower[0] - 1.0, box.upper[0] + 1.0), a};
}

}  // namespace

TEST(ObjectiveCost, WorkedExamples) {
  EXPECT_DOUBLE_EQ(Objective::synthetic_convex().cost(v2(0.3, -0.2), v2(0.3, -0.2)), 0.0);
  EXPECT_DOUBLE_EQ(Objective::synthetic_convex().cost(v2(1, 1), v2(0, 0)), 11.0);
  EXPECT_DOUBLE_EQ(Objective::synthetic_nonconvex().cost(v2(0, 0), v2(1, 1)), 12.0);
  EXPECT_DOUBLE_EQ(Objective::inventory().cost(Vec::Ones(7), Vec::Zero(7)), 147.0);

  const Objective wind1 = wind_reduce_reserve(Objective::wind(WindParams{}, 1));
  EXPECT_NEAR(wind1.cost(v1(2.0), v1(2.0)), -197.0, 1e-12);
  EXPECT_NEAR(wind1.cost(v1(1.0), v1(2.0)), 171.75, 1e-12);
}

TEST(ObjectiveCost, MatchesIndependentScalarFormulas) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const Vec y = random_vec(7, rng, -3, 3);
    const Vec a = random_vec(7, rng, -2, 3);
    double c = 0, n = 0, inv = 0;
    for (int i = 0; i < 2; ++i) {
      c += convex_dim(y[i], a[i]);
      n += nonconvex_dim(y[i], a[i]);
    }
    for (int i = 0; i < 7; ++i) inv += inventory_dim(y[i], a[i]);
    EXPECT_NEAR(Objective::synthetic_convex().cost(y.head(2), a.head(2)), c, 1e-12);
    EXPECT_NEAR(Objective::synthetic_nonconvex().cost(y.head(2), a.head(2)), n, 1e-12);
    EXPECT_NEAR(Objective::inventory().cost(y, a), inv, 1e-11);
  }
}

TEST(ObjectiveCost, DimensionMismatchAndNonfiniteInputAreRejected) {
  const Objective obj = Objective::synthetic_convex();
  EXPECT_THROW(obj.cost(Vec::Zero(3), Vec::Zero(2)), DimensionError);
  EXPECT_THROW(obj.grad_a(Vec::Zero(2), Vec::Zero(1)), DimensionError);
  EXPECT_THROW(obj.cost(v2(std::nan(""), 0), v2(0, 0)), NumericError);
}

TEST(ObjectiveCost, DimsAndFeasibleSets) {
  EXPECT_EQ(Objective::synthetic_convex().decision_dim(), 2);
  EXPECT_EQ(Objective::inventory().decision_dim(), 7);
  EXPECT_EQ(Objective::wind().outcome_dim(), 12);
  EXPECT_EQ(Objective::wind().decision_dim(), 24);
  EXPECT_EQ(wind_reduce_reserve(Objective::wind()).decision_dim(), 12);
  EXPECT_EQ(Objective::synthetic_convex().feasible().as_box().upper, Vec::Constant(2, 1.0));
  EXPECT_EQ(Objective::synthetic_nonconvex().feasible().as_box().lower, Vec::Constant(2, -2.0));
  EXPECT_EQ(Objective::wind().native_sense(), Sense::Maximize);
}

TEST(ObjectiveGrad, KinkConventionAndHandValues) {
  EXPECT_EQ(Objective::synthetic_convex().grad_a(v2(0.5, 0.5), v2(0.5, 0.5)), v2(-5, -5));
  EXPECT_DOUBLE_EQ(Objective::inventory(1).grad_a(v1(1.0), v1(2.0))[0], 7.0);
}

TEST(ObjectiveGrad, MatchesFiniteDifferencesAwayFromKinks) {
  std::mt19937_64 rng(11);
  for (const Objective& obj : all_objectives()) {
    int checked = 0;
    while (checked < 1000) {
      auto [y, a] = random_point(obj, rng);
      if (!away_from_kinks(obj, y, a, 1e-3)) continue;
      const Vec ga = numeric_grad([&](const Vec& z) { return obj.cost(y, z); }, a, 1e-7);
      const Vec gy = numeric_grad([&](const Vec& z) { return obj.cost(z, a); }, y, 1e-7);
      ASSERT_LT(rel_err(obj.grad_a(y, a), ga), 1e-5) << obj.tag();
      ASSERT_LT(rel_err(obj.grad_y(y, a), gy), 1e-5) << obj.tag();
      ++checked;
    }
  }
}

TEST(ObjectiveRows, MatchScalarCalls) {
  std::mt19937_64 rng(3);
  for (const Objective& obj : all_objectives()) {
    const int S = 37;
    auto [y0, a] = random_point(obj, rng);
    Mat Y(S, obj.outcome_dim());
    for (int s = 0; s < S; ++s) Y.row(s) = random_point(obj, rng).first.transpose();
    Y.row(0) = a.head(obj.outcome_dim()).transpose();  // a kink row
    const Vec w = random_vec(S, rng);

    Vec costs;
    obj.cost_rows(Y, a, costs);
    Vec ga = Vec::Zero(a.size());
    Mat gy_expect = Mat::Zero(S, Y.cols());
    for (int s = 0; s < S; ++s) {
      const Vec y = Y.row(s).transpose();
      EXPECT_NEAR(costs[s], obj.cost(y, a), 1e-11 * std::max(1.0, std::abs(costs[s])));
      ga += w[s] * obj.grad_a(y, a);
      gy_expect.row(s) = w[s] * obj.grad_y(y, a).transpose();
    }
    EXPECT_LT(rel_err(obj.weighted_grad_a_rows(Y, a, w), ga), 1e-12) << obj.tag();
    Mat gy = Mat::Zero(S, Y.cols());
    obj.accumulate_grad_y_rows(Y, a, w, gy);
    EXPECT_LT((gy - gy_expect).norm(), 1e-10 * std::max(1.0, gy_expect.norm())) << obj.tag();
  }
}

TEST(ObjectiveProperties, ConvexityOfConvexAndInventory) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> lam(0.0, 1.0);
  for (const Objective& obj : {Objective::synthetic_convex(), Objective::inventory()}) {
    for (int t = 0; t < 1000; ++t) {
      auto [y, a1] = random_point(obj, rng);
      const Vec a2 = random_point(obj, rng).second;
      const double l = lam(rng);
      EXPECT_LE(obj.cost(y, l * a1 + (1 - l) * a2), l * obj.cost(y, a1) + (1 - l) * obj.cost(y, a2) + 1e-9);
    }
  }
}

TEST(ObjectiveProperties, NonnegativeWithZeroOnlyAtYEqualsA) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 500; ++t) {
    const Vec y = random_vec(2, rng, -2, 2), a = random_vec(2, rng);
    EXPECT_GT(Objective::synthetic_convex().cost(y, a), 0.0);
    EXPECT_GE(Objective::inventory(2).cost(y, a), 0.0);
  }
}

TEST(WindObjective, BranchesAgreeAtTheUpperBoundaryAndJumpByPenaltyAtTheLower) {
  const WindParams p;
  std::mt19937_64 rng(23);
  for (int t = 0; t < 100; ++t) {
    const double a_e = random_vec(1, rng, 1.0, 4.0)[0];
    const double a_r = random_vec(1, rng, p.r_min, 1.0)[0];
    // middle and underbid branch formulas evaluated at y = a_e
    const double middle_at_ae = p.price * a_e - p.reserve_cost * a_r;
    const double under_at_ae = p.price * a_e - p.reserve_cost * a_r - p.down_linear * 0.0;
    EXPECT_DOUBLE_EQ(middle_at_ae, under_at_ae);
    EXPECT_NEAR(wind_period_profit(p, a_e, a_e, a_r), middle_at_ae, 1e-12);
    EXPECT_NEAR(wind_period_profit(p, a_e + 1e-9, a_e, a_r), middle_at_ae, 1e-6);

    // overbid and middle formulas at y = a_e - a_r differ by the fixed penalty
    const double y = a_e - a_r;
    const double middle = p.price * y - p.reserve_cost * a_r - p.deploy_price * a_r;
    const double over = p.price * y - p.reserve_cost * a_r - p.deploy_price * a_r - p.fixed_penalty;
    EXPECT_NEAR(wind_period_profit(p, y, a_e, a_r), middle, 1e-9);
    EXPECT_NEAR(wind_period_profit(p, y - 1e-12, a_e, a_r), over, 1e-8);
  }
}

TEST(WindObjective, ReducedObjectiveEqualsFullWithReserveAtMinimum) {
  const Objective full = Objective::wind();
  const Objective reduced = wind_reduce_reserve(full);
  std::mt19937_64 rng(29);
  for (int t = 0; t < 50; ++t) {
    const Vec y = random_vec(12, rng, 0, 4), a_e = random_vec(12, rng, 0, 4);
    Vec a(24);
    a << a_e, Vec::Constant(12, WindParams{}.r_min);
    EXPECT_NEAR(reduced.cost(y, a_e), full.cost(y, a), 1e-10);
  }
}

TEST(WindObjective, JointMinimumOverBidAndReserveHasReserveAtMinimum) {
  // For a fixed outcome the best (a_E, a_R) pair bids a_E = y with the
  // smallest reserve; a grid over both coordinates confirms it.
  const WindParams p;
  std::mt19937_64 rng(31);
  for (int t = 0; t < 20; ++t) {
    const double y = random_vec(1, rng, 0.5, 3.5)[0];
    double best = std::numeric_limits<double>::infinity(), best_r = -1;
    for (int i = 0; i <= 400; ++i) {
      const double a_e = p.e_min + (p.e_max - p.e_min) * i / 400.0;
      for (int j = 0; j <= 100; ++j) {
        const double a_r = p.r_min + (p.r_max - p.r_min) * j / 100.0;
        const double c = -wind_period_profit(p, y, a_e, a_r);
        if (c < best) best = c, best_r = a_r;
      }
    }
    EXPECT_DOUBLE_EQ(best_r, p.r_min);
  }
}

TEST(ObjectiveJson, RoundTrip) {
  for (const Objective& obj : all_objectives()) {
    const Objective back = Objective::from_json(nlohmann::json::parse(obj.to_json().dump()));
    EXPECT_EQ(back.tag(), obj.tag());
    EXPECT_EQ(back.decision_dim(), obj.decision_dim());
    std::mt19937_64 rng(1);
    auto [y, a] = random_point(obj, rng);
    EXPECT_EQ(back.cost(y, a), obj.cost(y, a));
  }
}

TEST(FeasibleSetTest, ContainsCenterAndValidates) {
  const FeasibleSet s = FeasibleSet::simplex(4, 2.0);
  EXPECT_TRUE(s.contains(s.center()));
  EXPECT_FALSE(s.contains(Vec::Constant(4, 0.6)));
  EXPECT_FALSE(s.contains((Vec(4) << -0.1, 1, 0, 0).finished()));
  EXPECT_THROW(FeasibleSet::box(Vec::Ones(2), Vec::Zero(2)), ConfigError);
  EXPECT_THROW(FeasibleSet::simplex(3, -1.0), ConfigError);
}
