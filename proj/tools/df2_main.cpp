// df2 command-line tool: data generation, training, decisions, evaluation
// and the seeded regret benchmark.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "df2/bench.hpp"
#include "df2/tasks.hpp"

namespace {

using namespace df2;

nlohmann::json read_json(const std::string& path, const std::string& what) {
  std::ifstream is(path);
  if (!is) throw ConfigError(what + ": cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": '" + path + "' is not valid JSON (" + e.what() + ")");
  }
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << j.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  return os;
}

std::string dataset_objective(const Dataset& ds, const std::string& flag) {
  if (!flag.empty()) return flag;
  if (ds.provenance.contains("objective_tag")) return ds.provenance["objective_tag"].get<std::string>();
  throw ConfigError("--objective is required (dataset provenance names no objective)");
}

struct Decisions {
  std::vector<int> rows;
  std::vector<Vec> a;
  nlohmann::json provenance;
};

void write_decisions(const std::string& path, const Decisions& d) {
  auto os = open_out(path);
  os << "# provenance: " << d.provenance.dump() << '\n';
  const int m = d.a.empty() ? 0 : static_cast<int>(d.a.front().size());
  os << "row";
  for (int i = 0; i < m; ++i) os << ",a_" << i;
  os << '\n';
  char buf[32];
  for (std::size_t k = 0; k < d.rows.size(); ++k) {
    os << d.rows[k];
    for (int i = 0; i < m; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", d.a[k][i]);
      os << ',' << buf;
    }
    os << '\n';
  }
}

Decisions read_decisions(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("--decisions: cannot open '" + path + "'");
  Decisions d;
  std::string line;
  bool header = false;
  int m = 0;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.rfind("# provenance:", 0) == 0) {
      d.provenance = nlohmann::json::parse(line.substr(13), nullptr, false);
      if (d.provenance.is_discarded()) throw ConfigError("--decisions: bad provenance line");
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!header) {
      if (f.empty() || f[0] != "row") throw ConfigError("--decisions: missing column 'row'");
      m = static_cast<int>(f.size()) - 1;
      header = true;
      continue;
    }
    if (static_cast<int>(f.size()) != m + 1) {
      throw ConfigError("--decisions: line " + std::to_string(line_no) + " has the wrong number of fields");
    }
    try {
      d.rows.push_back(std::stoi(f[0]));
      Vec a(m);
      for (int i = 0; i < m; ++i) a[i] = std::stod(f[static_cast<std::size_t>(i + 1)]);
      d.a.push_back(a);
    } catch (const std::exception&) {
      throw ConfigError("--decisions: line " + std::to_string(line_no) + " is not numeric");
    }
  }
  if (!header) throw ConfigError("--decisions: missing header line");
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-focused expected-cost surrogates: data, training, decisions and regret evaluation"};
  app.require_subcommand(1);

  // gen-data
  std::string task, out;
  int n = 0;
  std::uint64_t seed = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a seeded dataset (CSV plus provenance JSON)");
  gen->add_option("--task", task, "synthetic | wind | inventory | vaccine")->required();
  gen->add_option("--n", n, "number of records (default: task default)");
  gen->add_option("--seed", seed, "generator seed");
  gen->add_option("--out", out, "output CSV path")->required();

  // train
  std::string method, config_path, data_path, objective_flag, loss_out;
  auto* tr = app.add_subcommand("train", "Train a model and write its checkpoint and loss curve");
  tr->add_option("--method", method, "df2 | two-stage | policy (overrides the config)");
  tr->add_option("--config", config_path, "training config JSON");
  tr->add_option("--data", data_path, "dataset CSV")->required();
  tr->add_option("--objective", objective_flag, "objective tag (default: from the dataset)");
  tr->add_option("--out", out, "checkpoint JSON path")->required();
  tr->add_option("--loss-out", loss_out, "loss curve CSV (default: <out>.loss.csv)");

  // decide
  std::string model_path, solver_path, rows_flag = "test";
  auto* de = app.add_subcommand("decide", "Solve for decisions with a trained model");
  de->add_option("--model", model_path, "checkpoint JSON")->required();
  de->add_option("--data", data_path, "dataset CSV")->required();
  de->add_option("--solver-config", solver_path, "solver JSON {lr, iters, restarts, saa_samples, seed}");
  de->add_option("--rows", rows_flag, "test | all")->check(CLI::IsMember({"test", "all"}));
  de->add_option("--out", out, "decisions CSV")->required();

  // evaluate
  std::string decisions_path, oracle = "none";
  int n_mc = 100000;
  auto* ev = app.add_subcommand("evaluate", "Decision regret of a decisions file");
  ev->add_option("--decisions", decisions_path, "decisions CSV")->required();
  ev->add_option("--data", data_path, "dataset CSV")->required();
  ev->add_option("--objective", objective_flag, "objective tag (default: from the decisions/dataset)");
  ev->add_option("--oracle", oracle, "mc | exact | none")->check(CLI::IsMember({"mc", "exact", "none"}));
  ev->add_option("--n-mc", n_mc, "Monte Carlo draws per x for the mc oracle");
  ev->add_option("--out", out, "RegretReport JSON")->required();

  // landscape
  int x_index = 0, resolution = 21;
  bool truth_grid = false;
  auto* la = app.add_subcommand("landscape", "Grid of g(x, a) over a 2D decision box");
  la->add_option("--model", model_path, "DF2 checkpoint JSON")->required();
  la->add_option("--data", data_path, "dataset CSV supplying x")->required();
  la->add_option("--x-index", x_index, "row of the dataset");
  la->add_option("--resolution", resolution, "grid points per axis");
  la->add_flag("--truth", truth_grid, "write the ground-truth expected cost instead (synthetic data)");
  la->add_option("--n-mc", n_mc, "Monte Carlo draws for --truth");
  la->add_option("--out", out, "grid CSV")->required();

  // bench
  std::string suite = "synthetic-convex", methods_flag, table_path;
  int seeds = 5;
  auto* be = app.add_subcommand("bench", "Seeded regret-gap comparison across methods");
  be->add_option("--suite", suite, "synthetic-convex | synthetic-nonconvex");
  be->add_option("--seeds", seeds, "number of training seeds")->check(CLI::PositiveNumber);
  be->add_option("--config", config_path, "JSON overrides (points, epochs, actions, n, ...)");
  be->add_option("--methods", methods_flag, "default | ablation")->check(CLI::IsMember({"default", "ablation"}));
  be->add_option("--out", out, "report JSON (default: print only)");
  be->add_option("--table", table_path, "also write the text table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) {
      const int count = n > 0 ? n : task_defaults(task == "synthetic" ? "synthetic-convex" : task).n;
      Dataset ds = make_task_dataset(task, count, seed);
      save_csv(ds, out);
      write_json(out + ".json", ds.provenance);
      std::cout << "wrote " << ds.size() << " records (" << ds.count(Split::Train) << " train, "
                << ds.count(Split::Val) << " val, " << ds.count(Split::Test) << " test) to " << out << '\n';
    } else if (*tr) {
      nlohmann::json cfg_json = nlohmann::json::object();
      if (!config_path.empty()) cfg_json = read_json(config_path, "--config");
      if (!method.empty()) cfg_json["method"] = method;
      MethodConfig cfg = MethodConfig::from_json(cfg_json);
      const Dataset ds = load_csv(data_path);
      if (ds.empty() || ds.count(Split::Train) == 0) throw ConfigError("--data: empty dataset");
      if (!objective_flag.empty()) cfg.objective = objective_flag;
      const std::string tag = dataset_objective(ds, cfg.objective);
      const ObjectivePtr objective = objective_for_dataset(tag, ds);
      TrainedModel tm = train_method(cfg, ds, objective);
      tm.checkpoint["data"] = {{"path", data_path}, {"provenance", ds.provenance}};
      write_json(out, tm.checkpoint);
      auto los = open_out(loss_out.empty() ? out + ".loss.csv" : loss_out);
      write_loss_csv(los, tm.result.curve);
      std::cout << "trained " << cfg.method << " for " << tm.result.curve.size() << " epochs; best epoch "
                << tm.result.best_epoch << ", best validation loss " << tm.result.best_val_mse << '\n';
    } else if (*de) {
      const nlohmann::json ckpt = read_json(model_path, "--model");
      const ObjectivePtr objective = checkpoint_objective(ckpt);
      const Dataset ds = load_csv(data_path);
      if (ds.empty()) throw ConfigError("--data: empty dataset");
      const PgdConfig solver_defaults = task_defaults(objective->tag()).solver;
      const DecideConfig dc = DecideConfig::from_json(
          solver_path.empty() ? nlohmann::json::object() : read_json(solver_path, "--solver-config"), solver_defaults);
      const Decider decide = make_decider(ckpt, objective, dc);
      Decisions d;
      if (rows_flag == "test") {
        d.rows = evaluation_rows(ds);
      } else {
        for (int r = 0; r < ds.size(); ++r) d.rows.push_back(r);
      }
      for (int r : d.rows) d.a.push_back(decide(ds.x.row(r).transpose()));
      d.provenance = {{"model", model_path},
                      {"model_type", ckpt.value("type", "")},
                      {"objective_tag", objective->tag()},
                      {"objective", objective->to_json()},
                      {"decide", dc.to_json()},
                      {"data", data_path}};
      write_decisions(out, d);
      std::cout << "wrote " << d.rows.size() << " decisions to " << out << '\n';
    } else if (*ev) {
      const Decisions d = read_decisions(decisions_path);
      const Dataset ds = load_csv(data_path);
      if (ds.empty()) throw ConfigError("--data: empty dataset");
      ObjectivePtr objective;
      if (!objective_flag.empty()) {
        objective = objective_for_dataset(objective_flag, ds);
      } else if (d.provenance.contains("objective")) {
        objective = objective_from_json(d.provenance["objective"]);
      } else {
        objective = objective_for_dataset(dataset_objective(ds, ""), ds);
      }
      for (int r : d.rows) {
        if (r < 0 || r >= ds.size()) throw ConfigError("--decisions: row " + std::to_string(r) + " is not in the dataset");
      }
      std::unique_ptr<TrueExpectation> truth;
      std::vector<OracleResult> table;
      if (oracle != "none") {
        const GmmGenerator g = dataset_generator(ds);
        const std::uint64_t oseed = ds.provenance.value("seed", std::uint64_t{0});
        if (oracle == "exact") {
          truth = std::make_unique<ExactGmmExpectation>(g, objective);
        } else {
          truth = std::make_unique<McExpectation>(g, objective, n_mc, oseed);
        }
        table = oracle_table(ds, d.rows, *truth, objective->feasible(), task_defaults(objective->tag()).solver, 5, oseed);
      }
      RegretReport rep =
          decision_regret(d.a, ds, d.rows, *objective, truth.get(), truth ? &table : nullptr);
      rep.config = {{"decisions", decisions_path},
                    {"decisions_provenance", d.provenance},
                    {"data_provenance", ds.provenance},
                    {"objective", objective->to_json()},
                    {"oracle", truth ? truth->to_json() : nlohmann::json("none")}};
      rep.fingerprint = fingerprint(rep.config);
      write_json(out, rep.to_json());
      std::cout << "mean realized cost " << rep.mean_cost;
      if (rep.has_oracle) std::cout << ", mean regret gap " << rep.mean_gap << " (stderr " << rep.gap_stderr << ")";
      if (!rep.infeasible.empty()) std::cout << ", " << rep.infeasible.size() << " infeasible decisions";
      std::cout << '\n';
    } else if (*la) {
      const nlohmann::json ckpt = read_json(model_path, "--model");
      if (ckpt.value("type", "") != "df2") throw ConfigError("--model: landscape needs a df2 checkpoint");
      const ObjectivePtr objective = checkpoint_objective(ckpt);
      if (!objective->feasible().is_box() || objective->decision_dim() != 2) {
        throw ConfigError("--model: landscape needs a 2D box decision space");
      }
      const Dataset ds = load_csv(data_path);
      if (x_index < 0 || x_index >= ds.size()) throw ConfigError("--x-index: out of range for the dataset");
      const Vec x = ds.x.row(x_index).transpose();
      Mat grid;
      if (truth_grid) {
        const McExpectation truth(dataset_generator(ds), objective, n_mc, ds.provenance.value("seed", std::uint64_t{0}));
        grid = landscape_grid([&](const Vec& a) { return truth.value(x, a); }, objective->feasible().as_box(), resolution);
      } else {
        const AttentionSurrogate model = surrogate_from_json(ckpt, objective);
        const Vec w = attention_weights(model, x);
        grid = landscape_grid([&](const Vec& a) { return g_from_weights(model, w, a); }, objective->feasible().as_box(),
                              resolution);
      }
      auto os = open_out(out);
      os << "# provenance: "
         << nlohmann::json{{"model", model_path}, {"data", data_path}, {"x_index", x_index}, {"truth", truth_grid}}.dump()
         << '\n';
      write_landscape_csv(os, grid);
    } else if (*be) {
      BenchConfig cfg = BenchConfig::defaults(suite);
      cfg.seeds = seeds;
      nlohmann::json overrides = nlohmann::json::object();
      if (!config_path.empty()) overrides = read_json(config_path, "--config");
      if (!methods_flag.empty()) overrides["methods"] = methods_flag;
      cfg.apply_overrides(overrides);
      if (!be->get_option("--seeds")->empty()) cfg.seeds = seeds;
      const BenchReport rep = run_bench(cfg, &std::cerr);
      rep.write_table(std::cout);
      if (!table_path.empty()) {
        auto os = open_out(table_path);
        rep.write_table(os);
      }
      if (!out.empty()) {
        write_json(out, rep.to_json());
        write_json(out + ".timing.json", {{"runtime_seconds", rep.runtime_seconds}});
      }
      std::cerr << "[bench] finished in " << rep.runtime_seconds << " s\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
