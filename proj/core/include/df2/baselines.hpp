#pragma once

#include <string>
#include <vector>

#include "df2/learncore.hpp"
#include "df2/objectives.hpp"
#include "df2/samplers.hpp"
#include "df2/simdata.hpp"
#include "df2/solvers.hpp"
#include "df2/surrogate.hpp"

namespace df2 {

/// Log-variances produced by the forecaster are clamped to this range.
inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 8.0;

/// Mixture-density forecaster: trunk x -> hidden (ReLU) -> linear head with
/// C*m means, C*m log-variances and C mixture logits, in that order.
struct GmmForecaster {
  DenseNet net;
  int components = 1;
  int outcome_dim = 1;
  /// Point-estimate variant: trained with MSE on the first mean, decides on it.
  bool point_estimate = false;
  FeatureScaler scaler;
  std::uint64_t seed = 0;

  static GmmForecaster make(int x_dim, int outcome_dim, int components, int hidden = 128, std::uint64_t seed = 0);
  void validate() const;
};

struct GmmPrediction {
  Vec weights;  // C, softmax of the logits
  Mat mean;     // C x m
  Mat logvar;   // C x m, clamped
  Mat var() const { return logvar.array().exp().matrix(); }
  Vec mixture_mean() const { return mean.transpose() * weights; }
};

GmmPrediction predict(const GmmForecaster& fc, const Vec& x);

/// -log sum_c w_c N(y; mu_c, diag sigma_c^2), log-sum-exp stabilized.
double gmm_nll(const GmmForecaster& fc, const Vec& x, const Vec& y);
double gmm_nll(const GmmPrediction& pred, const Vec& y);

/// NLL (or squared error of the first mean for point-estimate models) with
/// its parameter gradient accumulated into grad.
double forecaster_loss(const GmmForecaster& fc, const Vec& x, const Vec& y, DenseGrad* grad = nullptr);

/// Ancestral samples, n x m.
Mat gmm_sample(const GmmForecaster& fc, const Vec& x, int n, std::uint64_t seed);
Mat gmm_sample(const GmmPrediction& pred, int n, Rng& rng);

struct BaselineTrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  int patience = 10;

  void validate() const;
  nlohmann::json to_json() const;
  static BaselineTrainConfig from_json(const nlohmann::json& j);
};

TrainResult train_two_stage(GmmForecaster& fc, const Dataset& ds, const BaselineTrainConfig& cfg);

/// argmin_a (1/n) sum_j f(y_j, a) with y_j drawn from the forecaster.
/// Point-estimate models use the single predicted mean.
Vec saa_decide(const GmmForecaster& fc, const Vec& x, const TaskObjective& objective, int n_samples,
               const PgdConfig& solver, std::uint64_t seed);

/// Same, over a given set of outcome draws (rows of Y).
Vec saa_decide_samples(const Mat& Y, const TaskObjective& objective, const PgdConfig& solver);

/// Direct policy x -> a with a feasibility map on the raw output:
/// box lower + (upper - lower) * sigmoid(z); simplex budget * softmax(z).
struct PolicyNet {
  DenseNet net;
  FeasibleSet feasible = FeasibleSet::uniform_box(1, 0.0, 1.0);
  FeatureScaler scaler;
  std::uint64_t seed = 0;

  static PolicyNet make(int x_dim, const FeasibleSet& feasible, int hidden = 128, std::uint64_t seed = 0);
};

Vec feasibility_map(const FeasibleSet& set, const Vec& raw);
/// Vector-Jacobian product of feasibility_map at raw.
Vec feasibility_map_backward(const FeasibleSet& set, const Vec& raw, const Vec& upstream);

Vec policy_decide(const PolicyNet& pn, const Vec& x);
/// f(y, decide(x)) with the gradient accumulated into grad.
double policy_loss(const PolicyNet& pn, const Vec& x, const Vec& y, const TaskObjective& objective,
                   DenseGrad* grad = nullptr);
TrainResult policy_train(PolicyNet& pn, const Dataset& ds, const TaskObjective& objective,
                         const BaselineTrainConfig& cfg);

nlohmann::json to_json(const GmmForecaster& fc);
GmmForecaster forecaster_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolicyNet& pn);
PolicyNet policy_from_json(const nlohmann::json& j);

}  // namespace df2
