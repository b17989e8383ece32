#pragma once

#include <iosfwd>
#include <vector>

#include "df2/objectives.hpp"

namespace df2 {

/// Per-region epidemic rates and populations for the metapopulation model.
struct SeirvParams {
  Vec beta;        // transmission rate
  Vec sigma;       // latent rate (E -> I)
  Vec gamma;       // recovery rate (I -> R)
  Vec population;  // N
  int horizon_days = 7;
  double dt = 1.0;

  int regions() const { return static_cast<int>(population.size()); }
  int steps() const;
  void validate() const;
  nlohmann::json to_json() const;
  static SeirvParams from_json(const nlohmann::json& j);
};

struct SeirvState {
  Vec S, E, I, R, V;

  static SeirvState susceptible(const Vec& population);
  int regions() const { return static_cast<int>(S.size()); }
  double total() const;
  void validate() const;
  nlohmann::json to_json() const;
  static SeirvState from_json(const nlohmann::json& j);
};

/// Origin-destination flows, flows(i, j, t) = people moving i -> j on day t.
/// Storage is day-major: index (t * K + i) * K + j.
class OdTensor {
 public:
  OdTensor() = default;
  OdTensor(int regions, int days);
  OdTensor(int regions, int days, Vec flat);

  int regions() const { return regions_; }
  int days() const { return days_; }
  double& operator()(int i, int j, int t) { return flat_[index(i, j, t)]; }
  double operator()(int i, int j, int t) const { return flat_[index(i, j, t)]; }
  const Vec& flat() const { return flat_; }
  Eigen::Index index(int i, int j, int t) const { return (static_cast<Eigen::Index>(t) * regions_ + i) * regions_ + j; }

 private:
  int regions_ = 0;
  int days_ = 0;
  Vec flat_;
};

/// rates(i,j,t) = od(i,j,t) / N[i] off the diagonal; rows whose outflow
/// exceeds 1 are rescaled to sum to exactly 1.
OdTensor normalize_od(const OdTensor& od, const Vec& population);

/// One explicit Euler step. `rates` is a normalized tensor and `day` selects
/// its slice. Every term is a transfer between compartments; when the
/// outflows of a compartment exceed its content they are scaled down
/// together, which keeps compartments >= 0 and conserves population.
SeirvState seirv_step(const SeirvState& state, const SeirvParams& params, const OdTensor& rates, int day,
                      const Vec& vaccines);

struct SeirvTrajectory {
  std::vector<SeirvState> states;  // states[0] is the initial state
  double new_infections = 0.0;
};

SeirvTrajectory simulate_seirv(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                               const SeirvState& init);
void write_trajectory_csv(std::ostream& os, const SeirvTrajectory& traj);

/// Sum over steps and regions of the E -> I transfer.
double total_new_infections(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                            const SeirvState& init, double budget);

/// d total_new_infections / d vaccines by forward-mode sensitivity
/// propagation through the Euler recurrence.
Vec grad_infections_a(const OdTensor& od, const Vec& vaccines, const SeirvParams& params, const SeirvState& init,
                      double budget);

struct InfectionGradients {
  double value = 0.0;
  Vec d_vaccines;
  Vec d_flows;  // same layout as OdTensor::flat()
};

/// Reverse-mode gradient of the same discretized quantity w.r.t. both the
/// vaccine allocation and the raw OD flows.
InfectionGradients infection_gradients_reverse(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                                               const SeirvState& init);

/// f(y, a) = total new infections, with y the flattened OD tensor.
/// Negative flows (possible for learned surrogate values) are treated as 0.
class SeirvObjective final : public TaskObjective {
 public:
  SeirvObjective(SeirvParams params, SeirvState init, int od_days, double budget);

  std::string tag() const override { return "vaccine"; }
  int decision_dim() const override { return params_.regions(); }
  int outcome_dim() const override { return params_.regions() * params_.regions() * od_days_; }
  const FeasibleSet& feasible() const override { return feasible_; }

  double cost(const Vec& y, const Vec& a) const override;
  Vec grad_a(const Vec& y, const Vec& a) const override;
  Vec grad_y(const Vec& y, const Vec& a) const override;

  nlohmann::json to_json() const override;
  static SeirvObjective from_json(const nlohmann::json& j);

  const SeirvParams& params() const { return params_; }
  const SeirvState& initial_state() const { return init_; }
  int od_days() const { return od_days_; }
  double budget() const { return budget_; }

 private:
  OdTensor to_od(const Vec& y) const;

  SeirvParams params_;
  SeirvState init_;
  int od_days_;
  double budget_;
  FeasibleSet feasible_;
};

}  // namespace df2
