#include "df2/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "df2/samplers.hpp"

namespace df2 {

AttentionSurrogate::AttentionSurrogate(DenseNet enc, Mat k, Mat v, ObjectivePtr obj)
    : encoder(std::move(enc)), keys(std::move(k)), values(std::move(v)), objective(std::move(obj)) {
  validate();
}

AttentionSurrogate AttentionSurrogate::make(int x_dim, ObjectivePtr objective, int points, int key_dim, int hidden,
                                            std::uint64_t seed) {
  if (!objective) throw ConfigError("surrogate: objective is required");
  if (points < 1) throw ConfigError("surrogate: number of attention points must be >= 1");
  if (key_dim < 1) throw ConfigError("surrogate: key dimension must be >= 1");
  if (x_dim < 1) throw ConfigError("surrogate: input dimension must be >= 1");
  std::vector<int> sizes{x_dim};
  if (hidden > 0) sizes.push_back(hidden);
  sizes.push_back(key_dim);
  DenseNet enc = DenseNet::make(sizes, Activation::Relu, seed);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat k(points, key_dim);
  const double r = 1.0 / std::sqrt(static_cast<double>(key_dim));
  for (Eigen::Index i = 0; i < k.size(); ++i) k.data()[i] = r * u(rng);
  AttentionSurrogate m(std::move(enc), std::move(k), Mat::Zero(points, objective->outcome_dim()), objective);
  m.seed = seed;
  return m;
}

void AttentionSurrogate::validate() const {
  if (!objective) throw ConfigError("surrogate: objective is required");
  if (keys.rows() < 1 || keys.cols() < 1) throw ConfigError("surrogate: need S >= 1 and d >= 1");
  if (values.rows() != keys.rows()) throw DimensionError("surrogate: keys and values must have S rows each");
  if (values.cols() != objective->outcome_dim()) {
    throw DimensionError("surrogate: value dim " + std::to_string(values.cols()) + " != outcome dim " +
                         std::to_string(objective->outcome_dim()));
  }
  if (encoder.empty() || encoder.output_dim() != keys.cols()) {
    throw DimensionError("surrogate: encoder output must match key dimension");
  }
  if (scaler.is_fitted() && scaler.mean.size() != encoder.input_dim()) {
    throw DimensionError("surrogate: feature scaler dim != encoder input dim");
  }
}

Vec surrogate_query(const AttentionSurrogate& model, const Vec& x, ForwardTrace* trace) {
  if (x.size() != model.encoder.input_dim()) {
    throw DimensionError("surrogate: x has dim " + std::to_string(x.size()) + ", expected " +
                         std::to_string(model.encoder.input_dim()));
  }
  return forward(model.encoder, model.scaler.apply(x), trace);
}

Vec softmax(const Vec& logits) {
  Vec w = (logits.array() - logits.maxCoeff()).exp();
  return w / w.sum();
}

namespace {

double inv_sqrt_d(const AttentionSurrogate& m) { return 1.0 / std::sqrt(static_cast<double>(m.key_dim())); }

void check_action(const AttentionSurrogate& m, const Vec& a) {
  if (a.size() != m.objective->decision_dim()) {
    throw DimensionError("surrogate: action has dim " + std::to_string(a.size()) + ", expected " +
                         std::to_string(m.objective->decision_dim()));
  }
}

// Softmax backward: d logits from d weights.
Vec softmax_backward(const Vec& w, const Vec& dw) {
  return w.cwiseProduct((dw.array() - w.dot(dw)).matrix());
}

void backprop_logits(const AttentionSurrogate& m, const ForwardTrace& trace, const Vec& q, const Vec& dlogit,
                     SurrogateGrad& grad) {
  const double s = inv_sqrt_d(m);
  grad.keys.noalias() += s * dlogit * q.transpose();
  const Vec dq = s * (m.keys.transpose() * dlogit);
  backward(m.encoder, trace, dq, grad.encoder);
}

}  // namespace

Vec attention_weights(const AttentionSurrogate& model, const Vec& x) {
  const Vec q = surrogate_query(model, x);
  return softmax(model.keys * q * inv_sqrt_d(model));
}

double g_from_weights(const AttentionSurrogate& model, const Vec& weights, const Vec& a) {
  check_action(model, a);
  Vec f;
  model.objective->cost_rows(model.values, a, f);
  return weights.dot(f);
}

Vec grad_g_a_from_weights(const AttentionSurrogate& model, const Vec& weights, const Vec& a) {
  check_action(model, a);
  return model.objective->weighted_grad_a_rows(model.values, a, weights);
}

double g(const AttentionSurrogate& model, const Vec& x, const Vec& a) {
  return g_from_weights(model, attention_weights(model, x), a);
}

Vec grad_g_a(const AttentionSurrogate& model, const Vec& x, const Vec& a) {
  return grad_g_a_from_weights(model, attention_weights(model, x), a);
}

SurrogateGrad SurrogateGrad::zeros_like(const AttentionSurrogate& model) {
  return {DenseGrad::zeros_like(model.encoder), Mat::Zero(model.keys.rows(), model.keys.cols()),
          Mat::Zero(model.values.rows(), model.values.cols())};
}

void SurrogateGrad::set_zero() {
  encoder.set_zero();
  keys.setZero();
  values.setZero();
}

SurrogateGrad& SurrogateGrad::operator*=(double s) {
  encoder *= s;
  keys *= s;
  values *= s;
  return *this;
}

SurrogateGrad grad_g_params(const AttentionSurrogate& model, const Vec& x, const Vec& a) {
  check_action(model, a);
  SurrogateGrad grad = SurrogateGrad::zeros_like(model);
  ForwardTrace trace;
  const Vec q = surrogate_query(model, x, &trace);
  const Vec w = softmax(model.keys * q * inv_sqrt_d(model));
  Vec f;
  model.objective->cost_rows(model.values, a, f);
  backprop_logits(model, trace, q, softmax_backward(w, f), grad);
  if (!model.values_frozen) model.objective->accumulate_grad_y_rows(model.values, a, w, grad.values);
  return grad;
}

ParamViews surrogate_params(AttentionSurrogate& model) {
  ParamViews p = model.encoder.params();
  p.emplace_back(model.keys.data(), static_cast<std::size_t>(model.keys.size()));
  if (!model.values_frozen) p.emplace_back(model.values.data(), static_cast<std::size_t>(model.values.size()));
  return p;
}

GradViews surrogate_grad_views(const AttentionSurrogate& model, const SurrogateGrad& grad) {
  GradViews v = grad.encoder.views();
  v.emplace_back(grad.keys.data(), static_cast<std::size_t>(grad.keys.size()));
  if (!model.values_frozen) v.emplace_back(grad.values.data(), static_cast<std::size_t>(grad.values.size()));
  return v;
}

Mat init_values_from_labels(const Dataset& ds, int points, std::uint64_t seed) {
  if (points < 1) throw ConfigError("init values: number of attention points must be >= 1");
  auto train = ds.indices(Split::Train);
  if (train.empty()) throw ConfigError("init values: empty dataset");
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, train.size() - 1);
  Mat v(points, ds.y_dim());
  for (int s = 0; s < points; ++s) v.row(s) = ds.y.row(train[pick(rng)]);
  return v;
}

// ---------------------------------------------------------------------------

void SurrogateTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train config: lr must be > 0");
  if (actions < 1) throw ConfigError("train config: actions must be >= 1");
  if (sampler != "uniform" && sampler != "hit-and-run") {
    throw ConfigError("train config: sampler must be 'uniform' or 'hit-and-run'");
  }
}

nlohmann::json SurrogateTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr},           {"actions", actions},
          {"seed", seed},     {"sampler", sampler},       {"patience", patience}};
}

SurrogateTrainConfig SurrogateTrainConfig::from_json(const nlohmann::json& j) {
  SurrogateTrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.actions = j.value("actions", c.actions);
    c.seed = j.value("seed", c.seed);
    c.sampler = j.value("sampler", c.sampler);
    c.patience = j.value("patience", c.patience);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

namespace {

Mat sample_actions(const FeasibleSet& set, int n, const std::string& sampler, Rng& rng) {
  if (sampler == "uniform") return sample_feasible(set, n, rng);
  const std::uint64_t seed = rng();
  HitAndRunOptions opts;
  opts.burn_in = 20;
  if (set.is_box()) {
    const Box& b = set.as_box();
    const int m = set.dim();
    Mat G(2 * m, m);
    G << Mat::Identity(m, m), -Mat::Identity(m, m);
    Vec h(2 * m);
    h << b.upper, -b.lower;
    return hit_and_run(G, h, set.center(), n, seed, opts);
  }
  // simplex: walk over the first dim-1 coordinates, last one takes the rest
  const auto& s = set.as_simplex();
  const int m = s.dim - 1;
  if (m == 0) return Mat::Constant(n, 1, s.budget);
  Mat G(m + 1, m);
  G << -Mat::Identity(m, m), Mat::Ones(1, m);
  Vec h = Vec::Zero(m + 1);
  h[m] = s.budget;
  const Vec a0 = Vec::Constant(m, s.budget / s.dim);
  const Mat inner = hit_and_run(G, h, a0, n, seed, opts);
  Mat out(n, s.dim);
  out.leftCols(m) = inner;
  out.col(m) = (s.budget - inner.rowwise().sum().array()).max(0.0).matrix();
  return out;
}

}  // namespace

double pair_loss(const AttentionSurrogate& model, const Vec& x, const Vec& y, const Mat& actions,
                 SurrogateGrad* grad) {
  const TaskObjective& obj = *model.objective;
  if (actions.cols() != obj.decision_dim()) throw DimensionError("pair loss: action dim mismatch");
  if (y.size() != obj.outcome_dim()) throw DimensionError("pair loss: y dim mismatch");
  const int J = static_cast<int>(actions.rows());
  if (J < 1) throw ConfigError("pair loss: need at least one action");
  ForwardTrace trace;
  const Vec q = surrogate_query(model, x, grad ? &trace : nullptr);
  const Vec w = softmax(model.keys * q * inv_sqrt_d(model));
  Vec f;
  Vec dw = Vec::Zero(w.size());
  double loss = 0.0;
  for (int j = 0; j < J; ++j) {
    const Vec a = actions.row(j).transpose();
    obj.cost_rows(model.values, a, f);
    const double r = w.dot(f) - obj.cost(y, a);
    loss += r * r;
    if (grad) {
      const double c = 2.0 * r / J;
      dw.noalias() += c * f;
      if (!model.values_frozen) obj.accumulate_grad_y_rows(model.values, a, c * w, grad->values);
    }
  }
  if (grad) backprop_logits(model, trace, q, softmax_backward(w, dw), *grad);
  return loss / J;
}

TrainResult train(AttentionSurrogate& model, const Dataset& ds, const SurrogateTrainConfig& cfg) {
  cfg.validate();
  model.validate();
  ds.validate();
  const auto train_idx = ds.indices(Split::Train);
  if (train_idx.empty()) throw ConfigError("train: empty dataset (no training records)");
  if (ds.x_dim() != model.x_dim()) throw DimensionError("train: dataset x dim != encoder input dim");
  if (ds.y_dim() != model.objective->outcome_dim()) throw DimensionError("train: dataset y dim != outcome dim");
  const auto val_idx = ds.indices(Split::Val);
  const FeasibleSet& set = model.objective->feasible();

  Rng rng(cfg.seed);
  // validation actions are drawn once so epochs are comparable
  std::vector<Mat> val_actions;
  {
    Rng vrng(cfg.seed ^ 0x5bd1e995ULL);
    for (std::size_t i = 0; i < val_idx.size(); ++i) val_actions.push_back(sample_actions(set, cfg.actions, cfg.sampler, vrng));
  }

  AdamConfig acfg;
  acfg.lr = cfg.lr;
  AdamState adam(acfg, surrogate_params(model));
  SurrogateGrad grad = SurrogateGrad::zeros_like(model);

  TrainResult result;
  AttentionSurrogate best = model;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<int> order = train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const int i = order[k];
        const Mat actions = sample_actions(set, cfg.actions, cfg.sampler, rng);
        batch_loss += pair_loss(model, ds.x.row(i).transpose(), ds.y.row(i).transpose(), actions, &grad);
      }
      ++batch_no;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      epoch_loss += batch_loss;
      grad *= 1.0 / static_cast<double>(end - start);
      adam_step(surrogate_params(model), surrogate_grad_views(model, grad), adam);
    }
    LossPoint pt{epoch, epoch_loss / static_cast<double>(order.size()), 0.0};
    if (!val_idx.empty()) {
      double v = 0.0;
      for (std::size_t k = 0; k < val_idx.size(); ++k) {
        const int i = val_idx[k];
        v += pair_loss(model, ds.x.row(i).transpose(), ds.y.row(i).transpose(), val_actions[k]);
      }
      pt.val_mse = v / static_cast<double>(val_idx.size());
      if (!std::isfinite(pt.val_mse)) throw NumericError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    } else {
      pt.val_mse = pt.train_mse;
    }
    result.curve.push_back(pt);
    if (pt.val_mse < best_score) {
      best_score = pt.val_mse;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  model = std::move(best);
  result.best_val_mse = best_score;
  return result;
}

void write_loss_csv(std::ostream& os, const std::vector<LossPoint>& curve) {
  os << "epoch,train_mse,val_mse\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", p.epoch, p.train_mse, p.val_mse);
    os << buf;
  }
}

nlohmann::json to_json(const AttentionSurrogate& model) {
  nlohmann::json j = {{"type", "df2"},
                      {"encoder", to_json(model.encoder)},
                      {"keys", matrix_to_json(model.keys)},
                      {"values", matrix_to_json(model.values)},
                      {"d", model.key_dim()},
                      {"S", model.points()},
                      {"objective_tag", model.objective->tag()},
                      {"objective", model.objective->to_json()},
                      {"values_frozen", model.values_frozen},
                      {"seed", model.seed}};
  if (model.scaler.is_fitted()) j["scaler"] = model.scaler.to_json();
  return j;
}

AttentionSurrogate surrogate_from_json(const nlohmann::json& j, ObjectivePtr objective) {
  try {
    if (j.value("type", std::string("df2")) != "df2") throw ConfigError("checkpoint: not a df2 model");
    if (!objective) throw ConfigError("checkpoint: objective is required");
    if (j.contains("objective_tag") && j["objective_tag"].get<std::string>() != objective->tag()) {
      throw ConfigError("checkpoint: objective tag '" + j["objective_tag"].get<std::string>() +
                        "' does not match '" + objective->tag() + "'");
    }
    AttentionSurrogate m(dense_net_from_json(j.at("encoder")), matrix_from_json(j.at("keys")),
                         matrix_from_json(j.at("values")), std::move(objective));
    if (j.at("S").get<int>() != m.points() || j.at("d").get<int>() != m.key_dim()) {
      throw DimensionError("checkpoint: S/d fields disagree with keys");
    }
    m.values_frozen = j.value("values_frozen", false);
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("scaler")) m.scaler = FeatureScaler::from_json(j["scaler"]);
    m.validate();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace df2
