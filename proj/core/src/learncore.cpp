#include "df2/learncore.hpp"

#include <cmath>
#include <random>

namespace df2 {

std::string to_string(Activation act) {
  switch (act) {
    case Activation::Identity: return "identity";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::Identity;
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + name + "'");
}

DenseNet::DenseNet(std::vector<DenseLayer> layers, std::uint64_t seed)
    : layers_(std::move(layers)), seed_(seed) {
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.bias.size() != l.weight.rows()) {
      throw DimensionError("layer " + std::to_string(k) + ": bias size does not match weight rows");
    }
    if (k > 0 && layers_[k - 1].weight.rows() != l.weight.cols()) {
      throw DimensionError("layer " + std::to_string(k) + ": input dim does not chain with previous output");
    }
  }
  if (!all_finite(*this)) throw NumericError("non-finite network parameter");
}

DenseNet DenseNet::make(const std::vector<int>& sizes, Activation hidden, std::uint64_t seed) {
  if (sizes.size() < 2) throw ConfigError("DenseNet needs at least input and output sizes");
  for (int s : sizes) {
    if (s <= 0) throw ConfigError("DenseNet layer sizes must be positive");
  }
  std::mt19937_64 rng(seed);
  std::vector<DenseLayer> layers;
  for (std::size_t k = 0; k + 1 < sizes.size(); ++k) {
    const int in = sizes[k];
    const int out = sizes[k + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> u(-bound, bound);
    DenseLayer layer;
    layer.weight.resize(out, in);
    layer.bias.resize(out);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) layer.weight(r, c) = u(rng);
    }
    for (int r = 0; r < out; ++r) layer.bias(r) = u(rng);
    layer.activation = (k + 2 == sizes.size()) ? Activation::Identity : hidden;
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers), seed);
}

int DenseNet::input_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int DenseNet::output_dim() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

ParamViews DenseNet::params() {
  ParamViews out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

DenseGrad DenseGrad::zeros_like(const DenseNet& net) {
  DenseGrad g;
  for (const auto& l : net.layers()) {
    g.weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vec::Zero(l.bias.size()));
  }
  return g;
}

void DenseGrad::set_zero() {
  for (auto& w : weight) w.setZero();
  for (auto& b : bias) b.setZero();
}

DenseGrad& DenseGrad::operator+=(const DenseGrad& other) {
  if (other.weight.size() != weight.size()) throw DimensionError("DenseGrad layer count mismatch");
  for (std::size_t k = 0; k < weight.size(); ++k) {
    weight[k] += other.weight[k];
    bias[k] += other.bias[k];
  }
  return *this;
}

DenseGrad& DenseGrad::operator*=(double s) {
  for (auto& w : weight) w *= s;
  for (auto& b : bias) b *= s;
  return *this;
}

GradViews DenseGrad::views() const {
  GradViews out;
  for (std::size_t k = 0; k < weight.size(); ++k) {
    out.emplace_back(weight[k].data(), static_cast<std::size_t>(weight[k].size()));
    out.emplace_back(bias[k].data(), static_cast<std::size_t>(bias[k].size()));
  }
  return out;
}

namespace {

Vec activate(Activation act, const Vec& z) {
  switch (act) {
    case Activation::Relu: return z.cwiseMax(0.0);
    case Activation::Tanh: return z.array().tanh().matrix();
    case Activation::Identity: break;
  }
  return z;
}

// d act(z) / dz, elementwise. ReLU uses 0 at z == 0.
Vec activation_slope(Activation act, const Vec& z) {
  switch (act) {
    case Activation::Relu: return (z.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh: return (1.0 - z.array().tanh().square()).matrix();
    case Activation::Identity: break;
  }
  return Vec::Ones(z.size());
}

}  // namespace

Vec forward(const DenseNet& net, const Vec& x, ForwardTrace* trace) {
  if (net.empty()) throw StateError("forward on an empty network");
  if (x.size() != net.input_dim()) {
    throw DimensionError("forward: input has " + std::to_string(x.size()) + " entries, network expects " +
                         std::to_string(net.input_dim()));
  }
  if (!x.allFinite()) throw NumericError("forward: non-finite input");
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
  }
  Vec h = x;
  for (const auto& l : net.layers()) {
    Vec z = l.weight * h + l.bias;
    if (trace) {
      trace->inputs.push_back(h);
      trace->pre.push_back(z);
    }
    h = activate(l.activation, z);
  }
  if (trace) trace->output = h;
  return h;
}

Vec backward(const DenseNet& net, const ForwardTrace& trace, const Vec& upstream, DenseGrad& acc) {
  if (!trace.recorded() || trace.inputs.size() != net.layers().size()) {
    throw StateError("backward called without a matching forward trace");
  }
  if (upstream.size() != net.output_dim()) throw DimensionError("backward: upstream size mismatch");
  if (acc.weight.size() != net.layers().size()) acc = DenseGrad::zeros_like(net);
  Vec delta = upstream;
  for (std::size_t k = net.layers().size(); k-- > 0;) {
    const auto& l = net.layers()[k];
    delta = delta.cwiseProduct(activation_slope(l.activation, trace.pre[k]));
    acc.weight[k].noalias() += delta * trace.inputs[k].transpose();
    acc.bias[k] += delta;
    delta = l.weight.transpose() * delta;
  }
  return delta;
}

AdamState::AdamState(const AdamConfig& cfg, const ParamViews& params) : cfg_(cfg) {
  for (const auto& p : params) {
    m_.push_back(Vec::Zero(static_cast<Eigen::Index>(p.size())));
    v_.push_back(Vec::Zero(static_cast<Eigen::Index>(p.size())));
  }
}

void adam_step(const ParamViews& params, const GradViews& grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw DimensionError("adam_step: parameter/gradient/state block counts differ");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() || static_cast<Eigen::Index>(params[b].size()) != state.m_[b].size()) {
      throw DimensionError("adam_step: block " + std::to_string(b) + " shape mismatch");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
  }
  const auto& c = state.cfg_;
  state.step_ += 1;
  const double t = static_cast<double>(state.step_);
  const double corr1 = 1.0 - std::pow(c.beta1, t);
  const double corr2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m_[b];
    auto& v = state.v_[b];
    for (std::size_t i = 0; i < params[b].size(); ++i) {
      const double g = grads[b][i];
      const auto ii = static_cast<Eigen::Index>(i);
      m[ii] = c.beta1 * m[ii] + (1.0 - c.beta1) * g;
      v[ii] = c.beta2 * v[ii] + (1.0 - c.beta2) * g * g;
      const double mhat = m[ii] / corr1;
      const double vhat = v[ii] / corr2;
      params[b][i] -= c.lr * mhat / (std::sqrt(vhat) + c.epsilon);
    }
  }
}

bool all_finite(const DenseNet& net) {
  for (const auto& l : net.layers()) {
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

nlohmann::json to_json(const DenseNet& net) {
  nlohmann::json layers = nlohmann::json::array();
  std::vector<int> dims;
  if (!net.empty()) dims.push_back(net.input_dim());
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (int r = 0; r < l.weight.rows(); ++r) {
      for (int c = 0; c < l.weight.cols(); ++c) w.push_back(l.weight(r, c));
    }
    layers.push_back({{"w", w},
                      {"b", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())},
                      {"activation", to_string(l.activation)},
                      {"in", l.weight.cols()},
                      {"out", l.weight.rows()}});
    dims.push_back(static_cast<int>(l.weight.rows()));
  }
  return {{"layers", layers}, {"meta", {{"dims", dims}, {"seed", net.seed()}}}};
}

DenseNet dense_net_from_json(const nlohmann::json& j) {
  try {
    std::vector<DenseLayer> layers;
    for (const auto& jl : j.at("layers")) {
      const int in = jl.at("in").get<int>();
      const int out = jl.at("out").get<int>();
      const auto w = jl.at("w").get<std::vector<double>>();
      const auto b = jl.at("b").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out) {
        throw DimensionError("checkpoint layer has inconsistent w/b sizes");
      }
      DenseLayer l;
      l.weight.resize(out, in);
      for (int r = 0; r < out; ++r) {
        for (int c = 0; c < in; ++c) l.weight(r, c) = w[static_cast<std::size_t>(r * in + c)];
      }
      l.bias = Eigen::Map<const Vec>(b.data(), out);
      l.activation = activation_from_string(jl.at("activation").get<std::string>());
      layers.push_back(std::move(l));
    }
    std::uint64_t seed = 0;
    if (j.contains("meta")) seed = j["meta"].value("seed", std::uint64_t{0});
    return DenseNet(std::move(layers), seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network checkpoint: ") + e.what());
  }
}

nlohmann::json matrix_to_json(const Mat& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

Mat matrix_from_json(const nlohmann::json& j) {
  try {
    const auto rows = j.at("rows").get<Eigen::Index>();
    const auto cols = j.at("cols").get<Eigen::Index>();
    const auto d = j.at("data").get<std::vector<double>>();
    if (rows < 0 || cols < 0 || static_cast<Eigen::Index>(d.size()) != rows * cols) {
      throw DimensionError("matrix json: data length does not match rows*cols");
    }
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = d[static_cast<std::size_t>(r * cols + c)];
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed matrix: ") + e.what());
  }
}

nlohmann::json vector_to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vector_from_json(const nlohmann::json& j) {
  try {
    const auto d = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed vector: ") + e.what());
  }
}

}  // namespace df2
