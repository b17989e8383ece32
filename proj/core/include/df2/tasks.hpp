#pragma once

#include <array>
#include <string>

#include "df2/baselines.hpp"
#include "df2/episim.hpp"
#include "df2/evaluation.hpp"
#include "df2/simdata.hpp"
#include "df2/solvers.hpp"
#include "df2/surrogate.hpp"

namespace df2 {

/// Per-objective defaults for data size, model size, training and the
/// decision solver.
struct TaskDefaults {
  int n = 5000;
  std::array<double, 3> split{0.7, 0.15, 0.15};
  int points = 1000;  // attention points S
  int epochs = 50;
  double lr = 1e-3;
  PgdConfig solver;
};

/// objective tag: synthetic-convex, synthetic-nonconvex, wind, inventory, vaccine
TaskDefaults task_defaults(const std::string& objective_tag);

/// Builds any objective from its JSON form (including the SEIRV one).
ObjectivePtr objective_from_json(const nlohmann::json& j);

/// Objective for a dataset: the tag picks the family; dims come from the
/// dataset, and the vaccine objective comes from the dataset provenance.
ObjectivePtr objective_for_dataset(const std::string& tag, const Dataset& ds);

/// gen-data tasks: synthetic, wind, inventory, vaccine. The result is split
/// with the task ratios and its provenance names the default objective.
Dataset make_task_dataset(const std::string& task, int n, std::uint64_t seed);

/// Unified training config for the three methods.
struct MethodConfig {
  std::string method = "df2";  // df2 | two-stage | policy
  std::string objective;       // empty: taken from the dataset
  int points = 0;              // 0: task default
  int key_dim = 16;
  int hidden = 128;
  int epochs = 0;              // 0: task default
  int batch_size = 64;
  double lr = 0.0;             // 0: task default
  int actions = 100;
  std::string sampler = "uniform";
  std::uint64_t seed = 0;
  int patience = 10;
  bool freeze_values = false;
  int components = 3;
  bool point_estimate = false;
  bool standardize = true;

  /// Unknown keys and wrong types raise ConfigError naming the field.
  static MethodConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TrainedModel {
  nlohmann::json checkpoint;
  TrainResult result;
};

TrainedModel train_method(const MethodConfig& cfg, const Dataset& ds, ObjectivePtr objective);

/// Decision rule for a checkpoint of any method.
struct DecideConfig {
  PgdConfig solver;
  int saa_samples = 100;
  std::uint64_t seed = 0;
  static DecideConfig from_json(const nlohmann::json& j, const PgdConfig& defaults);
  nlohmann::json to_json() const;
};

Decider make_decider(const nlohmann::json& checkpoint, ObjectivePtr objective, const DecideConfig& cfg);
/// Objective named by a checkpoint.
ObjectivePtr checkpoint_objective(const nlohmann::json& checkpoint);

/// GMM generator stored in a synthetic dataset's provenance.
GmmGenerator dataset_generator(const Dataset& ds);

}  // namespace df2
