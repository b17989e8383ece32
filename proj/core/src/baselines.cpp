#include "df2/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace df2 {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  return m + std::log((v.array() - m).exp().sum());
}

Vec scaled_input(const FeatureScaler& s, const Vec& x, int expected) {
  if (x.size() != expected) {
    throw DimensionError("x has dim " + std::to_string(x.size()) + ", expected " + std::to_string(expected));
  }
  return s.apply(x);
}

// Mini-batch Adam over a DenseNet with a per-record loss, keeping the best
// validation parameters.
template <class LossFn>
TrainResult train_dense(DenseNet& net, const Dataset& ds, const BaselineTrainConfig& cfg, LossFn loss,
                        const char* what) {
  cfg.validate();
  ds.validate();
  const auto train_idx = ds.indices(Split::Train);
  if (train_idx.empty()) throw ConfigError(std::string(what) + ": empty dataset (no training records)");
  const auto val_idx = ds.indices(Split::Val);
  Rng rng(cfg.seed);
  AdamConfig acfg;
  acfg.lr = cfg.lr;
  AdamState adam(acfg, net.params());
  DenseGrad grad = DenseGrad::zeros_like(net);
  TrainResult result;
  DenseNet best = net;
  double best_score = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::vector<int> order = train_idx;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.set_zero();
      double batch = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const int i = order[k];
        batch += loss(ds.x.row(i).transpose(), ds.y.row(i).transpose(), &grad);
      }
      ++batch_no;
      if (!std::isfinite(batch)) {
        throw NumericError(std::string(what) + ": non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      total += batch;
      grad *= 1.0 / static_cast<double>(end - start);
      adam_step(net.params(), grad.views(), adam);
    }
    LossPoint pt{epoch, total / static_cast<double>(order.size()), 0.0};
    if (!val_idx.empty()) {
      double v = 0.0;
      for (int i : val_idx) v += loss(ds.x.row(i).transpose(), ds.y.row(i).transpose(), nullptr);
      pt.val_mse = v / static_cast<double>(val_idx.size());
      if (!std::isfinite(pt.val_mse)) {
        throw NumericError(std::string(what) + ": non-finite validation loss at epoch " + std::to_string(epoch));
      }
    } else {
      pt.val_mse = pt.train_mse;
    }
    result.curve.push_back(pt);
    if (pt.val_mse < best_score) {
      best_score = pt.val_mse;
      best = net;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  net = std::move(best);
  result.best_val_mse = best_score;
  return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// GMM forecaster

GmmForecaster GmmForecaster::make(int x_dim, int outcome_dim, int components, int hidden, std::uint64_t seed) {
  if (x_dim < 1 || outcome_dim < 1) throw ConfigError("forecaster: dims must be >= 1");
  if (components < 1) throw ConfigError("forecaster: components must be >= 1");
  std::vector<int> sizes{x_dim};
  if (hidden > 0) sizes.push_back(hidden);
  sizes.push_back(components * (2 * outcome_dim + 1));
  GmmForecaster fc;
  fc.net = DenseNet::make(sizes, Activation::Relu, seed);
  fc.components = components;
  fc.outcome_dim = outcome_dim;
  fc.seed = seed;
  return fc;
}

void GmmForecaster::validate() const {
  if (components < 1 || outcome_dim < 1) throw ConfigError("forecaster: components and outcome_dim must be >= 1");
  if (net.empty() || net.output_dim() != components * (2 * outcome_dim + 1)) {
    throw DimensionError("forecaster: network output does not match the mixture head");
  }
}

namespace {

struct HeadLayout {
  int C, m;
  Eigen::Index mean(int c, int i) const { return c * m + i; }
  Eigen::Index logvar(int c, int i) const { return C * m + c * m + i; }
  Eigen::Index logit(int c) const { return 2 * C * m + c; }
};

GmmPrediction decode(const GmmForecaster& fc, const Vec& out) {
  const HeadLayout L{fc.components, fc.outcome_dim};
  GmmPrediction p;
  p.mean.resize(L.C, L.m);
  p.logvar.resize(L.C, L.m);
  Vec logits(L.C);
  for (int c = 0; c < L.C; ++c) {
    for (int i = 0; i < L.m; ++i) {
      p.mean(c, i) = out[L.mean(c, i)];
      p.logvar(c, i) = std::clamp(out[L.logvar(c, i)], kLogVarMin, kLogVarMax);
    }
    logits[c] = out[L.logit(c)];
  }
  p.weights = softmax(logits);
  return p;
}

// per-component log w_c + log N(y; mu_c, sigma_c^2)
Vec component_log_terms(const GmmPrediction& p, const Vec& y) {
  const Eigen::Index C = p.mean.rows();
  Vec lt(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    const auto d = (y.transpose() - p.mean.row(c)).array();
    const auto lv = p.logvar.row(c).array();
    lt[c] = std::log(p.weights[c]) - 0.5 * (kLog2Pi + lv + d.square() * (-lv).exp()).sum();
  }
  return lt;
}

}  // namespace

GmmPrediction predict(const GmmForecaster& fc, const Vec& x) {
  return decode(fc, forward(fc.net, scaled_input(fc.scaler, x, fc.net.input_dim())));
}

double gmm_nll(const GmmPrediction& pred, const Vec& y) {
  if (y.size() != pred.mean.cols()) throw DimensionError("gmm nll: y dim mismatch");
  return -log_sum_exp(component_log_terms(pred, y));
}

double gmm_nll(const GmmForecaster& fc, const Vec& x, const Vec& y) { return gmm_nll(predict(fc, x), y); }

double forecaster_loss(const GmmForecaster& fc, const Vec& x, const Vec& y, DenseGrad* grad) {
  if (y.size() != fc.outcome_dim) throw DimensionError("forecaster: y dim mismatch");
  ForwardTrace trace;
  const Vec out = forward(fc.net, scaled_input(fc.scaler, x, fc.net.input_dim()), grad ? &trace : nullptr);
  const HeadLayout L{fc.components, fc.outcome_dim};
  Vec up = Vec::Zero(out.size());
  double loss = 0.0;
  if (fc.point_estimate) {
    for (int i = 0; i < L.m; ++i) {
      const double r = out[L.mean(0, i)] - y[i];
      loss += r * r;
      up[L.mean(0, i)] = 2.0 * r / L.m;
    }
    loss /= L.m;
  } else {
    const GmmPrediction p = decode(fc, out);
    const Vec lt = component_log_terms(p, y);
    const double lse = log_sum_exp(lt);
    loss = -lse;
    const Vec resp = (lt.array() - lse).exp();
    for (int c = 0; c < L.C; ++c) {
      up[L.logit(c)] = p.weights[c] - resp[c];
      for (int i = 0; i < L.m; ++i) {
        const double inv_var = std::exp(-p.logvar(c, i));
        const double d = y[i] - p.mean(c, i);
        up[L.mean(c, i)] = -resp[c] * d * inv_var;
        const double raw = out[L.logvar(c, i)];
        if (raw > kLogVarMin && raw < kLogVarMax) up[L.logvar(c, i)] = resp[c] * 0.5 * (1.0 - d * d * inv_var);
      }
    }
  }
  if (grad) backward(fc.net, trace, up, *grad);
  return loss;
}

Mat gmm_sample(const GmmPrediction& pred, int n, Rng& rng) {
  if (n < 0) throw ConfigError("gmm sample: n must be >= 0");
  std::discrete_distribution<int> pick(pred.weights.data(), pred.weights.data() + pred.weights.size());
  std::normal_distribution<double> normal(0.0, 1.0);
  const Mat sd = (0.5 * pred.logvar.array()).exp().matrix();
  Mat out(n, pred.mean.cols());
  for (int r = 0; r < n; ++r) {
    const int c = pick(rng);
    for (Eigen::Index i = 0; i < out.cols(); ++i) out(r, i) = pred.mean(c, i) + sd(c, i) * normal(rng);
  }
  return out;
}

Mat gmm_sample(const GmmForecaster& fc, const Vec& x, int n, std::uint64_t seed) {
  Rng rng(seed);
  return gmm_sample(predict(fc, x), n, rng);
}

void BaselineTrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train config: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train config: batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train config: lr must be > 0");
}

nlohmann::json BaselineTrainConfig::to_json() const {
  return {{"epochs", epochs}, {"batch_size", batch_size}, {"lr", lr}, {"seed", seed}, {"patience", patience}};
}

BaselineTrainConfig BaselineTrainConfig::from_json(const nlohmann::json& j) {
  BaselineTrainConfig c;
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.seed = j.value("seed", c.seed);
    c.patience = j.value("patience", c.patience);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

TrainResult train_two_stage(GmmForecaster& fc, const Dataset& ds, const BaselineTrainConfig& cfg) {
  fc.validate();
  if (ds.x_dim() != fc.net.input_dim() || ds.y_dim() != fc.outcome_dim) {
    throw DimensionError("two-stage: dataset dims do not match the forecaster");
  }
  // the loss reads fc.net, which is the network being trained
  return train_dense(
      fc.net, ds, cfg,
      [&fc](const Vec& x, const Vec& y, DenseGrad* g) { return forecaster_loss(fc, x, y, g); },
      "two-stage");
}

Vec saa_decide_samples(const Mat& Y, const TaskObjective& objective, const PgdConfig& solver) {
  if (Y.rows() < 1) throw ConfigError("saa: need at least one outcome draw");
  if (Y.cols() != objective.outcome_dim()) throw DimensionError("saa: sample dim != outcome dim");
  const Vec w = Vec::Constant(Y.rows(), 1.0 / static_cast<double>(Y.rows()));
  Vec f;
  auto value = [&](const Vec& a) {
    objective.cost_rows(Y, a, f);
    return w.dot(f);
  };
  auto grad = [&](const Vec& a) { return objective.weighted_grad_a_rows(Y, a, w); };
  return minimize_over(objective.feasible(), value, grad, solver).a;
}

Vec saa_decide(const GmmForecaster& fc, const Vec& x, const TaskObjective& objective, int n_samples,
               const PgdConfig& solver, std::uint64_t seed) {
  if (n_samples < 1) throw ConfigError("saa: n_samples must be >= 1");
  const GmmPrediction pred = predict(fc, x);
  if (fc.point_estimate) return saa_decide_samples(pred.mean.row(0), objective, solver);
  Rng rng(seed);
  return saa_decide_samples(gmm_sample(pred, n_samples, rng), objective, solver);
}

// ---------------------------------------------------------------------------
// Policy network

PolicyNet PolicyNet::make(int x_dim, const FeasibleSet& feasible, int hidden, std::uint64_t seed) {
  if (x_dim < 1) throw ConfigError("policy: x dim must be >= 1");
  std::vector<int> sizes{x_dim};
  if (hidden > 0) sizes.push_back(hidden);
  sizes.push_back(feasible.dim());
  return {DenseNet::make(sizes, Activation::Relu, seed), feasible, {}, seed};
}

Vec feasibility_map(const FeasibleSet& set, const Vec& raw) {
  if (raw.size() != set.dim()) throw DimensionError("feasibility map: dim mismatch");
  if (set.is_box()) {
    const Box& b = set.as_box();
    const Vec s = (1.0 / (1.0 + (-raw.array()).exp())).matrix();
    return b.lower + (b.upper - b.lower).cwiseProduct(s);
  }
  return set.as_simplex().budget * softmax(raw);
}

Vec feasibility_map_backward(const FeasibleSet& set, const Vec& raw, const Vec& upstream) {
  if (raw.size() != set.dim() || upstream.size() != set.dim()) throw DimensionError("feasibility map: dim mismatch");
  if (set.is_box()) {
    const Box& b = set.as_box();
    const Vec s = (1.0 / (1.0 + (-raw.array()).exp())).matrix();
    return upstream.cwiseProduct(b.upper - b.lower).cwiseProduct((s.array() * (1.0 - s.array())).matrix());
  }
  const Vec p = softmax(raw);
  return set.as_simplex().budget * p.cwiseProduct((upstream.array() - p.dot(upstream)).matrix());
}

Vec policy_decide(const PolicyNet& pn, const Vec& x) {
  return feasibility_map(pn.feasible, forward(pn.net, scaled_input(pn.scaler, x, pn.net.input_dim())));
}

double policy_loss(const PolicyNet& pn, const Vec& x, const Vec& y, const TaskObjective& objective, DenseGrad* grad) {
  ForwardTrace trace;
  const Vec raw = forward(pn.net, scaled_input(pn.scaler, x, pn.net.input_dim()), grad ? &trace : nullptr);
  const Vec a = feasibility_map(pn.feasible, raw);
  const double loss = objective.cost(y, a);
  if (grad) backward(pn.net, trace, feasibility_map_backward(pn.feasible, raw, objective.grad_a(y, a)), *grad);
  return loss;
}

TrainResult policy_train(PolicyNet& pn, const Dataset& ds, const TaskObjective& objective,
                         const BaselineTrainConfig& cfg) {
  if (pn.feasible.dim() != objective.decision_dim()) throw DimensionError("policy: decision dim mismatch");
  if (ds.x_dim() != pn.net.input_dim() || ds.y_dim() != objective.outcome_dim()) {
    throw DimensionError("policy: dataset dims do not match");
  }
  return train_dense(
      pn.net, ds, cfg,
      [&](const Vec& x, const Vec& y, DenseGrad* g) { return policy_loss(pn, x, y, objective, g); },
      "policy");
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const GmmForecaster& fc) {
  nlohmann::json j = {{"type", "two-stage"},         {"net", to_json(fc.net)},
                      {"components", fc.components}, {"outcome_dim", fc.outcome_dim},
                      {"point_estimate", fc.point_estimate}, {"seed", fc.seed},
                      {"head", "mean[C*m], logvar[C*m], logits[C]"}};
  if (fc.scaler.is_fitted()) j["scaler"] = fc.scaler.to_json();
  return j;
}

GmmForecaster forecaster_from_json(const nlohmann::json& j) {
  try {
    if (j.value("type", std::string()) != "two-stage") throw ConfigError("checkpoint: not a two-stage model");
    GmmForecaster fc;
    fc.net = dense_net_from_json(j.at("net"));
    fc.components = j.at("components").get<int>();
    fc.outcome_dim = j.at("outcome_dim").get<int>();
    fc.point_estimate = j.value("point_estimate", false);
    fc.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("scaler")) fc.scaler = FeatureScaler::from_json(j["scaler"]);
    fc.validate();
    return fc;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

nlohmann::json to_json(const PolicyNet& pn) {
  nlohmann::json j = {
      {"type", "policy"}, {"net", to_json(pn.net)}, {"feasible", pn.feasible.to_json()}, {"seed", pn.seed}};
  if (pn.scaler.is_fitted()) j["scaler"] = pn.scaler.to_json();
  return j;
}

PolicyNet policy_from_json(const nlohmann::json& j) {
  try {
    if (j.value("type", std::string()) != "policy") throw ConfigError("checkpoint: not a policy model");
    PolicyNet pn{dense_net_from_json(j.at("net")), FeasibleSet::from_json(j.at("feasible")), {},
                 j.value("seed", std::uint64_t{0})};
    if (j.contains("scaler")) pn.scaler = FeatureScaler::from_json(j["scaler"]);
    if (pn.net.output_dim() != pn.feasible.dim()) throw DimensionError("checkpoint: policy output dim != decision dim");
    return pn;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace df2
