#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "df2/errors.hpp"

namespace df2 {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Views over a model's trainable storage, in a fixed order.
using ParamViews = std::vector<std::span<double>>;
using GradViews = std::vector<std::span<const double>>;

enum class Activation { Identity, Relu, Tanh };

std::string to_string(Activation act);
Activation activation_from_string(const std::string& name);

struct DenseLayer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation activation = Activation::Identity;
};

/// A feed-forward stack of affine layers, each followed by its activation.
class DenseNet {
 public:
  DenseNet() = default;
  explicit DenseNet(std::vector<DenseLayer> layers, std::uint64_t seed = 0);

  /// sizes = {input, hidden..., output}. Hidden layers use `hidden`, the last
  /// layer is affine. Weights and biases are uniform in +-1/sqrt(fan_in).
  static DenseNet make(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed);

  int input_dim() const;
  int output_dim() const;
  std::uint64_t seed() const { return seed_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  bool empty() const { return layers_.empty(); }

  ParamViews params();

 private:
  std::vector<DenseLayer> layers_;
  std::uint64_t seed_ = 0;
};

/// Intermediates recorded by forward() and consumed by backward().
struct ForwardTrace {
  std::vector<Vec> inputs;  // input of each layer
  std::vector<Vec> pre;     // pre-activation of each layer
  Vec output;
  bool recorded() const { return !inputs.empty(); }
};

struct DenseGrad {
  std::vector<Mat> weight;
  std::vector<Vec> bias;

  static DenseGrad zeros_like(const DenseNet& net);
  void set_zero();
  DenseGrad& operator+=(const DenseGrad& other);
  DenseGrad& operator*=(double s);
  GradViews views() const;
};

Vec forward(const DenseNet& net, const Vec& x, ForwardTrace* trace = nullptr);

/// Accumulates d<upstream, net(x)>/dparams into `acc` and returns the input
/// gradient. `trace` must come from forward() on the same net.
Vec backward(const DenseNet& net, const ForwardTrace& trace, const Vec& upstream, DenseGrad& acc);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const AdamConfig& cfg, const ParamViews& params);

  const AdamConfig& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  long step_count() const { return step_; }

 private:
  friend void adam_step(const ParamViews&, const GradViews&, AdamState&);
  AdamConfig cfg_;
  long step_ = 0;
  std::vector<Vec> m_;
  std::vector<Vec> v_;
};

/// Bias-corrected Adam update, in place. Throws NumericError on a non-finite
/// gradient before any parameter is touched.
void adam_step(const ParamViews& params, const GradViews& grads, AdamState& state);

bool all_finite(const DenseNet& net);

nlohmann::json to_json(const DenseNet& net);
DenseNet dense_net_from_json(const nlohmann::json& j);

/// {"rows", "cols", "data"} with data row-major.
nlohmann::json matrix_to_json(const Mat& m);
Mat matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const Vec& v);
Vec vector_from_json(const nlohmann::json& j);

}  // namespace df2
