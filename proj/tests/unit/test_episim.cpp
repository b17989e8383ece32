#include <gtest/gtest.h>

#include <sstream>

#include "df2/episim.hpp"
#include "test_util.hpp"

using namespace df2;
using namespace df2::testing;

namespace {

struct Instance {
  SeirvParams params;
  SeirvState init;
  OdTensor od;
  Vec vaccines;
  double budget = 0.0;
};

Instance random_instance(std::mt19937_64& rng, int K, int days, int horizon) {
  Instance in;
  in.params.population = random_vec(K, rng, 1e4, 1e5);
  in.params.beta = random_vec(K, rng, 0.25, 0.4);
  in.params.sigma = random_vec(K, rng, 0.2, 0.3);
  in.params.gamma = random_vec(K, rng, 0.1, 0.15);
  in.params.horizon_days = horizon;
  in.init = SeirvState::susceptible(in.params.population);
  in.init.E = in.params.population.cwiseProduct(random_vec(K, rng, 0.001, 0.01));
  in.init.I = in.params.population.cwiseProduct(random_vec(K, rng, 0.001, 0.01));
  in.init.S -= in.init.E + in.init.I;
  in.od = OdTensor(K, days);
  std::uniform_real_distribution<double> frac(0.0, 0.05);
  for (int t = 0; t < days; ++t)
    for (int i = 0; i < K; ++i)
      for (int j = 0; j < K; ++j)
        if (i != j) in.od(i, j, t) = frac(rng) * in.params.population[i];
  in.budget = 0.04 * in.params.population.sum();
  in.vaccines = random_vec(K, rng, 0.1, 1.0);
  in.vaccines *= 0.9 * in.budget / in.vaccines.sum();
  return in;
}

}  // namespace

TEST(NormalizeOd, Examples) {
  const Vec pop = (Vec(2) << 100.0, 200.0).finished();
  OdTensor od(2, 1);
  EXPECT_EQ(normalize_od(od, pop).flat(), Vec::Zero(4));
  od(0, 1, 0) = 50.0;
  od(1, 1, 0) = 999.0;  // diagonal is ignored
  const OdTensor r = normalize_od(od, pop);
  EXPECT_DOUBLE_EQ(r(0, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(r(1, 1, 0), 0.0);
  OdTensor big(3, 1);
  big(0, 1, 0) = 150.0;
  big(0, 2, 0) = 50.0;
  const OdTensor rb = normalize_od(big, Vec::Constant(3, 100.0));
  EXPECT_DOUBLE_EQ(rb(0, 1, 0) + rb(0, 2, 0), 1.0);
  EXPECT_DOUBLE_EQ(rb(0, 1, 0), 0.75);
  EXPECT_THROW(normalize_od(od, (Vec(2) << 100.0, 0.0).finished()), ConfigError);
}

TEST(SeirvStep, FrozenDynamicsLeaveStateUnchanged) {
  SeirvParams p;
  p.population = Vec::Constant(2, 1000.0);
  p.beta = p.sigma = p.gamma = Vec::Zero(2);
  SeirvState s = SeirvState::susceptible(p.population);
  s.S -= Vec::Constant(2, 30.0);
  s.I = Vec::Constant(2, 30.0);
  const SeirvState next = seirv_step(s, p, OdTensor(2, 1), 0, Vec::Zero(2));
  EXPECT_EQ(next.S, s.S);
  EXPECT_EQ(next.I, s.I);
  EXPECT_EQ(next.V, s.V);
}

TEST(SeirvStep, VaccinationMovesSusceptiblesToVaccinated) {
  SeirvParams p;
  p.population = Vec::Constant(1, 1000.0);
  p.beta = p.sigma = p.gamma = Vec::Zero(1);
  const SeirvState s = SeirvState::susceptible(p.population);
  const SeirvState next = seirv_step(s, p, OdTensor(1, 1), 0, Vec::Constant(1, 10.0 * p.horizon_days));
  EXPECT_DOUBLE_EQ(next.S[0], 990.0);
  EXPECT_DOUBLE_EQ(next.V[0], 10.0);
}

TEST(SeirvSimulation, ConservesPopulationOnRandomInstances) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 100; ++t) {
    const int K = 1 + static_cast<int>(rng() % 10);
    Instance in = random_instance(rng, K, 7, 14);
    const SeirvTrajectory traj = simulate_seirv(in.od, in.vaccines, in.params, in.init);
    ASSERT_EQ(traj.states.size(), 15u);
    const double total = in.init.total();
    for (const auto& s : traj.states) {
      EXPECT_LT(std::abs(s.total() - total) / total, 1e-8);
      EXPECT_GE(std::min({s.S.minCoeff(), s.E.minCoeff(), s.I.minCoeff(), s.R.minCoeff(), s.V.minCoeff()}), 0.0);
    }
  }
}

TEST(SeirvSimulation, HeavyVaccinationStaysNonnegativeAndConserves) {
  // Whole population vaccinated within a day drives the outflow limiter.
  std::mt19937_64 rng(8);
  Instance in = random_instance(rng, 3, 7, 7);
  in.params.horizon_days = 1;
  const Vec v = in.params.population * 2.0;
  const SeirvTrajectory traj = simulate_seirv(in.od, v, in.params, in.init);
  for (const auto& s : traj.states) {
    EXPECT_NEAR(s.total(), in.init.total(), 1e-8 * in.init.total());
    EXPECT_GE(s.S.minCoeff(), 0.0);
  }
}

TEST(SeirvSimulation, ZeroTransmissionGivesExactlyZeroNewInfections) {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    Instance in = random_instance(rng, 4, 7, 14);
    in.params.beta.setZero();
    in.init.S += in.init.E;
    in.init.E.setZero();
    EXPECT_EQ(total_new_infections(in.od, in.vaccines, in.params, in.init, in.budget), 0.0);
    EXPECT_EQ(total_new_infections(in.od, in.vaccines * 1.1, in.params, in.init, in.budget), 0.0);
    EXPECT_EQ(grad_infections_a(in.od, in.vaccines, in.params, in.init, in.budget), Vec::Zero(4));
  }
}

TEST(SeirvSimulation, TwoRegionsTwoStepsMatchHandRecurrence) {
  SeirvParams p;
  p.population = (Vec(2) << 1000.0, 2000.0).finished();
  p.beta = (Vec(2) << 0.3, 0.4).finished();
  p.sigma = (Vec(2) << 0.25, 0.2).finished();
  p.gamma = (Vec(2) << 0.1, 0.12).finished();
  p.horizon_days = 2;
  SeirvState init = SeirvState::susceptible(p.population);
  init.E = (Vec(2) << 10.0, 4.0).finished();
  init.I = (Vec(2) << 5.0, 8.0).finished();
  init.S -= init.E + init.I;
  OdTensor od(2, 1);
  od(0, 1, 0) = 50.0;
  od(1, 0, 0) = 40.0;
  const Vec a = (Vec(2) << 20.0, 30.0).finished();

  // Plain Euler with every flow written out.
  double S[2] = {init.S[0], init.S[1]}, E[2] = {10, 4}, I[2] = {5, 8}, R[2] = {0, 0}, V[2] = {0, 0};
  const double m[2] = {50.0 / 1000.0, 40.0 / 2000.0};
  double total = 0;
  for (int step = 0; step < 2; ++step) {
    double nS[2], nE[2], nI[2], nR[2], nV[2];
    for (int k = 0; k < 2; ++k) {
      const int o = 1 - k;
      const double inf = p.beta[k] / p.population[k] * S[k] * I[k];
      const double vs = S[k] / (S[k] + E[k]) * a[k] / 2.0, ve = E[k] / (S[k] + E[k]) * a[k] / 2.0;
      nS[k] = S[k] - inf - vs - m[k] * S[k] + m[o] * S[o];
      nE[k] = E[k] + inf - p.sigma[k] * E[k] - ve - m[k] * E[k] + m[o] * E[o];
      nI[k] = I[k] + p.sigma[k] * E[k] - p.gamma[k] * I[k] - m[k] * I[k] + m[o] * I[o];
      nR[k] = R[k] + p.gamma[k] * I[k] - m[k] * R[k] + m[o] * R[o];
      nV[k] = V[k] + vs + ve - m[k] * V[k] + m[o] * V[o];
      total += p.sigma[k] * E[k];
    }
    for (int k = 0; k < 2; ++k) S[k] = nS[k], E[k] = nE[k], I[k] = nI[k], R[k] = nR[k], V[k] = nV[k];
  }
  EXPECT_NEAR(total_new_infections(od, a, p, init, 100.0), total, 1e-10);
  const SeirvTrajectory traj = simulate_seirv(od, a, p, init);
  EXPECT_NEAR(traj.states.back().V[1], V[1], 1e-10);
  EXPECT_NEAR(traj.states.back().I[0], I[0], 1e-10);
}

TEST(SeirvSimulation, InfeasibleAllocationIsRejected) {
  std::mt19937_64 rng(10);
  Instance in = random_instance(rng, 3, 7, 7);
  EXPECT_THROW(total_new_infections(in.od, Vec::Constant(3, -1.0), in.params, in.init, in.budget), ConfigError);
  EXPECT_THROW(total_new_infections(in.od, Vec::Constant(3, in.budget), in.params, in.init, in.budget), ConfigError);
}

TEST(SeirvSimulation, MoreVaccineNeverIncreasesInfections) {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 100; ++t) {
    Instance in = random_instance(rng, 1 + static_cast<int>(rng() % 5), 7, 7);
    const double lo = total_new_infections(in.od, in.vaccines * 0.5, in.params, in.init, in.budget);
    const double hi = total_new_infections(in.od, in.vaccines, in.params, in.init, in.budget);
    EXPECT_LE(hi, lo + 1e-9 * std::abs(lo));
  }
}

TEST(SeirvSimulation, DeterministicTrajectories) {
  std::mt19937_64 rng(13);
  Instance in = random_instance(rng, 4, 7, 14);
  std::ostringstream a, b;
  write_trajectory_csv(a, simulate_seirv(in.od, in.vaccines, in.params, in.init));
  write_trajectory_csv(b, simulate_seirv(in.od, in.vaccines, in.params, in.init));
  EXPECT_EQ(a.str(), b.str());
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "step,region,S,E,I,R,V");
}

TEST(SeirvGradients, ForwardAndReverseAgreeWithFiniteDifferences) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 100; ++t) {
    const int K = 2 + static_cast<int>(rng() % 4);
    Instance in = random_instance(rng, K, 7, 7);
    auto f_a = [&](const Vec& v) { return total_new_infections(in.od, v, in.params, in.init, 2.0 * in.budget); };
    const Vec fd = numeric_grad(f_a, in.vaccines, 1e-3 / std::max(1.0, in.vaccines.maxCoeff()));
    const Vec fwd = grad_infections_a(in.od, in.vaccines, in.params, in.init, in.budget);
    const InfectionGradients rev = infection_gradients_reverse(in.od, in.vaccines, in.params, in.init);
    ASSERT_LT(rel_err(fwd, fd), 1e-4) << "trial " << t;
    ASSERT_LT(rel_err(rev.d_vaccines, fwd), 1e-10);
    EXPECT_NEAR(rev.value, f_a(in.vaccines), 1e-9 * rev.value);
    EXPECT_LE(fwd.maxCoeff(), 0.0);

    auto f_flows = [&](const Vec& flat) {
      return total_new_infections(OdTensor(K, 7, flat), in.vaccines, in.params, in.init, in.budget);
    };
    const Vec fd_flows = numeric_grad(f_flows, in.od.flat(), 1e-3);
    // Diagonal flows have no effect; FD and analytic both give zero there.
    ASSERT_LT(rel_err(rev.d_flows, fd_flows), 1e-4) << "trial " << t;
  }
}

TEST(SeirvObjectiveTest, WrapsTheSimulator) {
  std::mt19937_64 rng(31);
  Instance in = random_instance(rng, 3, 7, 7);
  const SeirvObjective obj(in.params, in.init, 7, in.budget);
  EXPECT_EQ(obj.decision_dim(), 3);
  EXPECT_EQ(obj.outcome_dim(), 63);
  EXPECT_TRUE(obj.feasible().is_simplex());
  EXPECT_DOUBLE_EQ(obj.cost(in.od.flat(), in.vaccines),
                   total_new_infections(in.od, in.vaccines, in.params, in.init, in.budget));
  const Vec gy = obj.grad_y(in.od.flat(), in.vaccines);
  const Vec fd = numeric_grad([&](const Vec& y) { return obj.cost(y, in.vaccines); }, in.od.flat(), 1e-3);
  EXPECT_LT(rel_err(gy, fd), 1e-4);
  const SeirvObjective back = SeirvObjective::from_json(nlohmann::json::parse(obj.to_json().dump()));
  EXPECT_EQ(back.cost(in.od.flat(), in.vaccines), obj.cost(in.od.flat(), in.vaccines));
}
