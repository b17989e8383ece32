#include "df2/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>

namespace df2 {

double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {

BenchMethod method(const std::string& name, const std::string& suite, const std::string& kind) {
  MethodConfig c;
  c.objective = suite;
  c.method = kind;
  return {name, c};
}

}  // namespace

std::vector<BenchMethod> BenchConfig::default_methods(const std::string& suite) {
  std::vector<BenchMethod> m;
  m.push_back(method("df2", suite, "df2"));
  auto c1 = method("two-stage-c1", suite, "two-stage");
  c1.config.components = 1;
  m.push_back(c1);
  auto c3 = method("two-stage-c3", suite, "two-stage");
  c3.config.components = 3;
  m.push_back(c3);
  auto pe = method("two-stage-pe", suite, "two-stage");
  pe.config.point_estimate = true;
  m.push_back(pe);
  m.push_back(method("policy", suite, "policy"));
  return m;
}

std::vector<BenchMethod> BenchConfig::ablation_methods(const std::string& suite) {
  std::vector<BenchMethod> m;
  m.push_back(method("df2", suite, "df2"));
  auto frozen = method("df2-frozen", suite, "df2");
  frozen.config.freeze_values = true;
  m.push_back(frozen);
  auto j5 = method("df2-j5", suite, "df2");
  j5.config.actions = 5;
  m.push_back(j5);
  return m;
}

BenchConfig BenchConfig::defaults(const std::string& suite) {
  if (suite != "synthetic-convex" && suite != "synthetic-nonconvex") {
    throw ConfigError("--suite: unknown suite '" + suite + "' (synthetic-convex|synthetic-nonconvex)");
  }
  BenchConfig c;
  c.suite = suite;
  c.decide.solver = task_defaults(suite).solver;
  c.methods = default_methods(suite);
  return c;
}

void BenchConfig::apply_overrides(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("bench config must be a JSON object");
  static const std::set<std::string> known{"seeds",  "n",       "data_seed",  "oracle",  "n_mc",       "test_limit",
                                           "points", "epochs",  "actions",    "lr",      "batch_size", "hidden",
                                           "key_dim", "patience", "methods", "solver_lr", "solver_iters", "solver_restarts",
                                           "saa_samples"};
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError("bench config field '" + key + "' is not recognized");
  }
  auto get = [&j](const char* key, auto& out) {
    if (!j.contains(key)) return false;
    try {
      out = j.at(key).get<std::decay_t<decltype(out)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string("bench config field '") + key + "' has the wrong type");
    }
    return true;
  };
  get("seeds", seeds);
  get("n", n);
  get("data_seed", data_seed);
  get("oracle", oracle);
  get("n_mc", n_mc);
  get("test_limit", test_limit);
  get("solver_lr", decide.solver.lr);
  get("solver_iters", decide.solver.iters);
  get("solver_restarts", decide.solver.restarts);
  get("saa_samples", decide.saa_samples);
  std::string which;
  if (get("methods", which)) {
    if (which == "default") {
      methods = default_methods(suite);
    } else if (which == "ablation") {
      methods = ablation_methods(suite);
    } else {
      throw ConfigError("bench config field 'methods' must be 'default' or 'ablation'");
    }
  }
  for (auto& m : methods) {
    get("points", m.config.points);
    get("epochs", m.config.epochs);
    get("lr", m.config.lr);
    get("batch_size", m.config.batch_size);
    get("hidden", m.config.hidden);
    get("key_dim", m.config.key_dim);
    get("patience", m.config.patience);
    if (m.name != "df2-j5") get("actions", m.config.actions);
  }
  if (seeds < 1) throw ConfigError("bench config field 'seeds' must be >= 1");
  if (n < 10) throw ConfigError("bench config field 'n' must be >= 10");
  if (oracle != "exact" && oracle != "mc") throw ConfigError("bench config field 'oracle' must be exact or mc");
}

nlohmann::json BenchConfig::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : methods) ms.push_back({{"name", m.name}, {"config", m.config.to_json()}});
  return {{"suite", suite},   {"seeds", seeds},           {"n", n},
          {"data_seed", data_seed}, {"oracle", oracle},   {"n_mc", n_mc},
          {"test_limit", test_limit}, {"decide", decide.to_json()}, {"methods", ms}};
}

const MethodSummary& BenchReport::method(const std::string& name) const {
  for (const auto& m : methods) {
    if (m.name == name) return m;
  }
  throw ConfigError("bench report has no method '" + name + "'");
}

nlohmann::json BenchReport::to_json() const {
  nlohmann::json ms = nlohmann::json::array();
  for (const auto& m : methods) {
    ms.push_back({{"method", m.name},
                  {"regret_gap_median", m.median},
                  {"regret_gap_min", m.min},
                  {"regret_gap_max", m.max},
                  {"regret_gap_spread", m.spread},
                  {"regret_gap_mean", m.mean},
                  {"regret_gap_std", m.std},
                  {"regret_gap_stderr", m.stderr_},
                  {"regret_gap_per_seed", m.gaps},
                  {"mean_realized_cost_per_seed", m.costs}});
  }
  return {{"suite", suite},
          {"fingerprint", fingerprint},
          {"test_rows", test_rows},
          {"oracle_mean_expected_cost", oracle_mean_expected},
          {"methods", ms},
          {"config", config}};
}

void BenchReport::write_table(std::ostream& os) const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-16s %14s %14s %14s %14s\n", "method", "gap_median", "gap_spread", "gap_min",
                "gap_max");
  os << buf;
  for (const auto& m : methods) {
    std::snprintf(buf, sizeof buf, "%-16s %14.6f %14.6f %14.6f %14.6f\n", m.name.c_str(), m.median, m.spread, m.min,
                  m.max);
    os << buf;
  }
}

BenchReport run_bench(const BenchConfig& cfg, std::ostream* progress) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.methods.empty()) throw ConfigError("bench: no methods configured");
  const GmmGenerator gen = GmmGenerator::three_component(2, 2, cfg.data_seed);
  Dataset ds = split(generate(gen, cfg.n, cfg.data_seed), task_defaults(cfg.suite).split, cfg.data_seed);
  const ObjectivePtr objective = objective_for_dataset(cfg.suite, ds);

  std::unique_ptr<TrueExpectation> truth;
  if (cfg.oracle == "exact") {
    truth = std::make_unique<ExactGmmExpectation>(gen, objective);
  } else {
    truth = std::make_unique<McExpectation>(gen, objective, cfg.n_mc, cfg.data_seed);
  }
  std::vector<int> rows = evaluation_rows(ds);
  if (cfg.test_limit > 0 && static_cast<int>(rows.size()) > cfg.test_limit) rows.resize(static_cast<std::size_t>(cfg.test_limit));
  const auto oracle = oracle_table(ds, rows, *truth, objective->feasible(), cfg.decide.solver, 5, cfg.data_seed);

  BenchReport rep;
  rep.suite = cfg.suite;
  rep.config = cfg.to_json();
  rep.fingerprint = fingerprint(rep.config);
  rep.test_rows = static_cast<int>(rows.size());
  for (const auto& o : oracle) rep.oracle_mean_expected += o.expected_cost / static_cast<double>(oracle.size());

  for (const auto& m : cfg.methods) {
    MethodSummary sum;
    sum.name = m.name;
    for (int s = 0; s < cfg.seeds; ++s) {
      MethodConfig mc = m.config;
      mc.seed = static_cast<std::uint64_t>(s);
      const TrainedModel tm = train_method(mc, ds, objective);
      DecideConfig dc = cfg.decide;
      dc.seed = static_cast<std::uint64_t>(s);
      const Decider decide = make_decider(tm.checkpoint, objective, dc);
      std::vector<Vec> decisions;
      decisions.reserve(rows.size());
      for (int r : rows) decisions.push_back(decide(ds.x.row(r).transpose()));
      const RegretReport rr = decision_regret(decisions, ds, rows, *objective, truth.get(), &oracle);
      sum.gaps.push_back(rr.mean_gap);
      sum.costs.push_back(rr.mean_cost);
      if (progress) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "[bench] %s seed %d: gap %.6f (best epoch %d)\n", m.name.c_str(), s, rr.mean_gap,
                      tm.result.best_epoch);
        *progress << buf << std::flush;
      }
    }
    sum.median = median(sum.gaps);
    sum.min = *std::min_element(sum.gaps.begin(), sum.gaps.end());
    sum.max = *std::max_element(sum.gaps.begin(), sum.gaps.end());
    sum.spread = sum.max - sum.min;
    const double n = static_cast<double>(sum.gaps.size());
    sum.mean = std::accumulate(sum.gaps.begin(), sum.gaps.end(), 0.0) / n;
    if (sum.gaps.size() > 1) {
      double ss = 0.0;
      for (double g : sum.gaps) ss += (g - sum.mean) * (g - sum.mean);
      sum.std = std::sqrt(ss / (n - 1.0));
      sum.stderr_ = sum.std / std::sqrt(n);
    }
    rep.methods.push_back(std::move(sum));
  }
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace df2
