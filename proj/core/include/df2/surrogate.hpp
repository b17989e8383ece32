#pragma once

#include <functional>
#include <string>
#include <vector>

#include "df2/learncore.hpp"
#include "df2/objectives.hpp"
#include "df2/simdata.hpp"

namespace df2 {

/// Expected-cost surrogate g(x, a) = sum_s softmax(q(x)'K / sqrt(d))_s f(v_s, a).
///
/// The encoder maps standardized features to the query q(x). Keys are S x d,
/// values are S x outcome_dim and live in outcome space.
class AttentionSurrogate {
 public:
  AttentionSurrogate() = default;
  AttentionSurrogate(DenseNet encoder, Mat keys, Mat values, ObjectivePtr objective);

  /// Encoder x -> hidden (ReLU) -> d; keys uniform in +-1/sqrt(d); values zero.
  static AttentionSurrogate make(int x_dim, ObjectivePtr objective, int points, int key_dim = 16, int hidden = 128,
                                 std::uint64_t seed = 0);

  int points() const { return static_cast<int>(keys.rows()); }
  int key_dim() const { return static_cast<int>(keys.cols()); }
  int x_dim() const { return encoder.input_dim(); }
  const TaskObjective& task() const { return *objective; }

  void validate() const;

  DenseNet encoder;
  Mat keys;
  Mat values;
  ObjectivePtr objective;
  FeatureScaler scaler;  // applied to x before the encoder; empty means identity
  bool values_frozen = false;
  std::uint64_t seed = 0;
};

/// Query q(x) after feature scaling.
Vec surrogate_query(const AttentionSurrogate& model, const Vec& x, ForwardTrace* trace = nullptr);

/// Max-subtracted softmax of the scaled logits K q / sqrt(d).
Vec attention_weights(const AttentionSurrogate& model, const Vec& x);
Vec softmax(const Vec& logits);

double g(const AttentionSurrogate& model, const Vec& x, const Vec& a);
/// g for a query already computed, used by the decision solver inner loop.
double g_from_weights(const AttentionSurrogate& model, const Vec& weights, const Vec& a);
Vec grad_g_a_from_weights(const AttentionSurrogate& model, const Vec& weights, const Vec& a);

struct SurrogateGrad {
  DenseGrad encoder;
  Mat keys;
  Mat values;  // left zero when values are frozen

  static SurrogateGrad zeros_like(const AttentionSurrogate& model);
  void set_zero();
  SurrogateGrad& operator*=(double s);
};

/// Gradients of g(x, a) with respect to the encoder, keys and values.
SurrogateGrad grad_g_params(const AttentionSurrogate& model, const Vec& x, const Vec& a);
Vec grad_g_a(const AttentionSurrogate& model, const Vec& x, const Vec& a);

/// Trainable storage in a fixed order: encoder layers, keys, then values
/// unless frozen. grad_views() uses the same order.
ParamViews surrogate_params(AttentionSurrogate& model);
GradViews surrogate_grad_views(const AttentionSurrogate& model, const SurrogateGrad& grad);

/// S rows drawn uniformly with replacement from the training labels.
Mat init_values_from_labels(const Dataset& ds, int points, std::uint64_t seed);

struct SurrogateTrainConfig {
  int epochs = 50;
  int batch_size = 64;
  double lr = 1e-3;
  int actions = 100;  // J
  std::uint64_t seed = 0;
  std::string sampler = "uniform";  // "uniform" (box or Dirichlet) or "hit-and-run"
  int patience = 10;                // early stop on validation MSE; <= 0 disables

  void validate() const;
  nlohmann::json to_json() const;
  static SurrogateTrainConfig from_json(const nlohmann::json& j);
};

struct LossPoint {
  int epoch = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
};

struct TrainResult {
  std::vector<LossPoint> curve;
  int best_epoch = 0;
  double best_val_mse = 0.0;
};

/// Per-pair loss (1/J) sum_j (f(y, a_j) - g(x, a_j))^2 and its parameter
/// gradient (accumulated into grad). Exposed for gradient checks.
double pair_loss(const AttentionSurrogate& model, const Vec& x, const Vec& y, const Mat& actions,
                 SurrogateGrad* grad = nullptr);

/// Mini-batch Adam on the mean pair loss. Keeps the parameters with the best
/// validation MSE (train MSE if there is no validation split).
/// Throws NumericError on a non-finite loss.
TrainResult train(AttentionSurrogate& model, const Dataset& ds, const SurrogateTrainConfig& cfg);

void write_loss_csv(std::ostream& os, const std::vector<LossPoint>& curve);

nlohmann::json to_json(const AttentionSurrogate& model);
/// The objective is not reconstructed here; pass the one named by the checkpoint.
AttentionSurrogate surrogate_from_json(const nlohmann::json& j, ObjectivePtr objective);

}  // namespace df2
