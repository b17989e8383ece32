#include "df2/tasks.hpp"

#include <set>

namespace df2 {

TaskDefaults task_defaults(const std::string& tag) {
  TaskDefaults d;
  if (tag == "synthetic-convex" || tag == "synthetic-nonconvex" || tag == "synthetic") {
    // restarts: the nonconvex cost has boundary basins a single start misses
    d.solver = {0.01, 500, 5, 0};
    return d;
  }
  d.split = {0.64, 0.16, 0.2};
  if (tag == "wind" || tag == "wind-reduced") {
    d.n = 2000;
    d.points = 500;
    d.epochs = 200;
    d.solver = {0.1, 500};
    return d;
  }
  if (tag == "inventory") {
    d.n = 2000;
    d.points = 230;
    d.epochs = 200;
    d.solver = {0.1, 500};
    return d;
  }
  if (tag == "vaccine") {
    d.n = 200;
    d.points = 100;
    d.epochs = 50;
    d.lr = 1e-4;
    d.solver = {0.01, 500};
    return d;
  }
  throw ConfigError("unknown task or objective '" + tag + "'");
}

ObjectivePtr objective_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("objective: missing field 'type'");
  if (j["type"] == "vaccine") return std::make_shared<SeirvObjective>(SeirvObjective::from_json(j));
  return std::make_shared<Objective>(Objective::from_json(j));
}

ObjectivePtr objective_for_dataset(const std::string& tag, const Dataset& ds) {
  const int m = ds.y_dim();
  if (m < 1) throw ConfigError("dataset has no outcome columns");
  if (tag == "synthetic-convex") return std::make_shared<Objective>(Objective::synthetic_convex(m));
  if (tag == "synthetic-nonconvex") return std::make_shared<Objective>(Objective::synthetic_nonconvex(m));
  if (tag == "inventory") return std::make_shared<Objective>(Objective::inventory(m));
  if (tag == "wind") return std::make_shared<Objective>(Objective::wind(WindParams{}, m));
  if (tag == "wind-reduced") return std::make_shared<Objective>(wind_reduce_reserve(Objective::wind(WindParams{}, m)));
  if (tag == "vaccine") {
    if (!ds.provenance.contains("objective") || ds.provenance["objective"].value("type", "") != "vaccine") {
      throw ConfigError("vaccine objective needs a dataset produced by 'gen-data --task vaccine'");
    }
    auto obj = objective_from_json(ds.provenance["objective"]);
    if (obj->outcome_dim() != m) throw DimensionError("vaccine objective outcome dim != dataset y dim");
    return obj;
  }
  throw ConfigError("unknown objective '" + tag + "'");
}

namespace {

// Epidemic setup for a synthetic OD dataset: seeded per-region rates, a small
// seeded outbreak and a budget of 4% of the total population.
SeirvObjective vaccine_objective(const Dataset& ds, std::uint64_t seed) {
  const auto& od = ds.provenance.at("od");
  const Vec population = vector_from_json(od.at("population"));
  const int K = static_cast<int>(population.size());
  Rng rng(seed ^ 0xa5a5a5a5ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  SeirvParams p;
  p.beta.resize(K);
  p.sigma.resize(K);
  p.gamma.resize(K);
  p.population = population;
  for (int k = 0; k < K; ++k) {
    p.beta[k] = 0.25 + 0.15 * u(rng);
    p.sigma[k] = 0.2 + 0.1 * u(rng);
    p.gamma[k] = 0.1 + 0.05 * u(rng);
  }
  p.horizon_days = 7;
  SeirvState init = SeirvState::susceptible(population);
  for (int k = 0; k < K; ++k) {
    const double frac = 0.002 * u(rng);
    init.E[k] = frac * population[k];
    init.I[k] = frac * population[k];
    init.S[k] = population[k] - init.E[k] - init.I[k];
  }
  return SeirvObjective(p, init, od.at("days").get<int>(), 0.04 * population.sum());
}

}  // namespace

Dataset make_task_dataset(const std::string& task, int n, std::uint64_t seed) {
  if (n < 1) throw ConfigError("--n must be >= 1");
  Dataset ds;
  std::string objective;
  if (task == "synthetic") {
    ds = generate(GmmGenerator::three_component(2, 2, seed), n, seed);
    objective = "synthetic-convex";
  } else if (task == "wind") {
    ds = synth_timeseries(SeriesTask::Wind, n, seed);
    objective = "wind";
  } else if (task == "inventory") {
    ds = synth_timeseries(SeriesTask::Inventory, n, seed);
    objective = "inventory";
  } else if (task == "vaccine") {
    ds = synth_timeseries(SeriesTask::OriginDestination, n, seed);
    objective = "vaccine";
    ds.provenance["objective"] = vaccine_objective(ds, seed).to_json();
  } else {
    throw ConfigError("--task: unknown task '" + task + "' (synthetic|wind|inventory|vaccine)");
  }
  ds = split(std::move(ds), task_defaults(objective).split, seed);
  ds.provenance["task"] = task;
  ds.provenance["objective_tag"] = objective;
  return ds;
}

GmmGenerator dataset_generator(const Dataset& ds) {
  if (!ds.provenance.contains("generator")) {
    throw ConfigError("dataset provenance has no generator (only synthetic datasets support the oracle)");
  }
  return GmmGenerator::from_json(ds.provenance["generator"]);
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

}  // namespace

MethodConfig MethodConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"method",     "objective", "points",         "key_dim",        "hidden",
                                           "epochs",     "batch_size", "lr",            "actions",        "sampler",
                                           "seed",       "patience",  "freeze_values",  "components",     "point_estimate",
                                           "standardize"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("config field '" + key + "' is not recognized");
  }
  MethodConfig c;
  read_field(j, "method", c.method);
  read_field(j, "objective", c.objective);
  read_field(j, "points", c.points);
  read_field(j, "key_dim", c.key_dim);
  read_field(j, "hidden", c.hidden);
  read_field(j, "epochs", c.epochs);
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "lr", c.lr);
  read_field(j, "actions", c.actions);
  read_field(j, "sampler", c.sampler);
  read_field(j, "seed", c.seed);
  read_field(j, "patience", c.patience);
  read_field(j, "freeze_values", c.freeze_values);
  read_field(j, "components", c.components);
  read_field(j, "point_estimate", c.point_estimate);
  read_field(j, "standardize", c.standardize);
  if (c.method != "df2" && c.method != "two-stage" && c.method != "policy") {
    throw ConfigError("config field 'method' must be df2, two-stage or policy");
  }
  if (c.points < 0) throw ConfigError("config field 'points' must be >= 0");
  if (c.key_dim < 1) throw ConfigError("config field 'key_dim' must be >= 1");
  if (c.hidden < 0) throw ConfigError("config field 'hidden' must be >= 0");
  if (c.epochs < 0) throw ConfigError("config field 'epochs' must be >= 0");
  if (c.batch_size < 1) throw ConfigError("config field 'batch_size' must be >= 1");
  if (c.lr < 0) throw ConfigError("config field 'lr' must be >= 0");
  if (c.actions < 1) throw ConfigError("config field 'actions' must be >= 1");
  if (c.components < 1) throw ConfigError("config field 'components' must be >= 1");
  return c;
}

nlohmann::json MethodConfig::to_json() const {
  return {{"method", method},         {"objective", objective},   {"points", points},
          {"key_dim", key_dim},       {"hidden", hidden},         {"epochs", epochs},
          {"batch_size", batch_size}, {"lr", lr},                 {"actions", actions},
          {"sampler", sampler},       {"seed", seed},             {"patience", patience},
          {"freeze_values", freeze_values}, {"components", components}, {"point_estimate", point_estimate},
          {"standardize", standardize}};
}

TrainedModel train_method(const MethodConfig& cfg, const Dataset& ds, ObjectivePtr objective) {
  ds.validate();
  if (ds.count(Split::Train) == 0) throw ConfigError("empty dataset: no training records");
  const TaskDefaults def = task_defaults(objective->tag());
  const int epochs = cfg.epochs > 0 ? cfg.epochs : def.epochs;
  const double lr = cfg.lr > 0 ? cfg.lr : def.lr;
  const FeatureScaler scaler = cfg.standardize ? FeatureScaler::fit(ds) : FeatureScaler{};
  TrainedModel out;
  if (cfg.method == "df2") {
    const int points = cfg.points > 0 ? cfg.points : def.points;
    AttentionSurrogate model = AttentionSurrogate::make(ds.x_dim(), objective, points, cfg.key_dim, cfg.hidden, cfg.seed);
    model.scaler = scaler;
    model.values = init_values_from_labels(ds, points, cfg.seed + 1);
    model.values_frozen = cfg.freeze_values;
    SurrogateTrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = cfg.batch_size;
    tc.lr = lr;
    tc.actions = cfg.actions;
    tc.seed = cfg.seed;
    tc.sampler = cfg.sampler;
    tc.patience = cfg.patience;
    out.result = train(model, ds, tc);
    out.checkpoint = to_json(model);
  } else if (cfg.method == "two-stage") {
    GmmForecaster fc = GmmForecaster::make(ds.x_dim(), ds.y_dim(), cfg.point_estimate ? 1 : cfg.components,
                                           cfg.hidden, cfg.seed);
    fc.point_estimate = cfg.point_estimate;
    fc.scaler = scaler;
    out.result = train_two_stage(fc, ds, {epochs, cfg.batch_size, lr, cfg.seed, cfg.patience});
    out.checkpoint = to_json(fc);
  } else {
    PolicyNet pn = PolicyNet::make(ds.x_dim(), objective->feasible(), cfg.hidden, cfg.seed);
    pn.scaler = scaler;
    out.result = policy_train(pn, ds, *objective, {epochs, cfg.batch_size, lr, cfg.seed, cfg.patience});
    out.checkpoint = to_json(pn);
  }
  out.checkpoint["objective"] = objective->to_json();
  out.checkpoint["objective_tag"] = objective->tag();
  out.checkpoint["train_config"] = cfg.to_json();
  out.checkpoint["best_epoch"] = out.result.best_epoch;
  return out;
}

// ---------------------------------------------------------------------------

DecideConfig DecideConfig::from_json(const nlohmann::json& j, const PgdConfig& defaults) {
  if (!j.is_object()) throw ConfigError("solver config must be a JSON object");
  static const std::set<std::string> known{"lr", "iters", "restarts", "saa_samples", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("solver config field '" + key + "' is not recognized");
  }
  DecideConfig c;
  c.solver = defaults;
  read_field(j, "lr", c.solver.lr);
  read_field(j, "iters", c.solver.iters);
  read_field(j, "restarts", c.solver.restarts);
  read_field(j, "saa_samples", c.saa_samples);
  read_field(j, "seed", c.seed);
  if (!(c.solver.lr > 0)) throw ConfigError("solver config field 'lr' must be > 0");
  if (c.solver.iters < 0) throw ConfigError("solver config field 'iters' must be >= 0");
  if (c.solver.restarts < 1) throw ConfigError("solver config field 'restarts' must be >= 1");
  if (c.saa_samples < 1) throw ConfigError("solver config field 'saa_samples' must be >= 1");
  return c;
}

nlohmann::json DecideConfig::to_json() const {
  return {{"lr", solver.lr},
          {"iters", solver.iters},
          {"restarts", solver.restarts},
          {"saa_samples", saa_samples},
          {"seed", seed}};
}

ObjectivePtr checkpoint_objective(const nlohmann::json& checkpoint) {
  if (!checkpoint.contains("objective")) throw ConfigError("checkpoint: missing field 'objective'");
  return objective_from_json(checkpoint["objective"]);
}

namespace {

std::uint64_t hash_x(const Vec& x, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  const auto* p = reinterpret_cast<const unsigned char*>(x.data());
  for (std::size_t i = 0; i < sizeof(double) * static_cast<std::size_t>(x.size()); ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

Decider make_decider(const nlohmann::json& checkpoint, ObjectivePtr objective, const DecideConfig& cfg) {
  const std::string type = checkpoint.value("type", "");
  if (type == "df2") {
    auto model = std::make_shared<AttentionSurrogate>(surrogate_from_json(checkpoint, objective));
    return [model, cfg](const Vec& x) {
      const Vec w = attention_weights(*model, x);
      auto value = [&](const Vec& a) { return g_from_weights(*model, w, a); };
      auto grad = [&](const Vec& a) { return grad_g_a_from_weights(*model, w, a); };
      return minimize_over(model->objective->feasible(), value, grad, cfg.solver).a;
    };
  }
  if (type == "two-stage") {
    auto fc = std::make_shared<GmmForecaster>(forecaster_from_json(checkpoint));
    if (fc->outcome_dim != objective->outcome_dim()) throw DimensionError("checkpoint: outcome dim mismatch");
    return [fc, objective, cfg](const Vec& x) {
      return saa_decide(*fc, x, *objective, cfg.saa_samples, cfg.solver, hash_x(x, cfg.seed));
    };
  }
  if (type == "policy") {
    auto pn = std::make_shared<PolicyNet>(policy_from_json(checkpoint));
    return [pn](const Vec& x) { return policy_decide(*pn, x); };
  }
  throw ConfigError("checkpoint: unknown model type '" + type + "'");
}

}  // namespace df2
