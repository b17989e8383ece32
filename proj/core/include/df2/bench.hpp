#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "df2/tasks.hpp"

namespace df2 {

struct BenchMethod {
  std::string name;
  MethodConfig config;
};

/// A seeded regret-gap comparison on a synthetic task. The dataset is fixed by
/// data_seed; seed k trains every method with training seed k.
struct BenchConfig {
  std::string suite = "synthetic-convex";
  int seeds = 5;
  int n = 5000;
  std::uint64_t data_seed = 0;
  std::string oracle = "exact";  // exact | mc
  int n_mc = 100000;
  int test_limit = 0;            // 0: every test row
  DecideConfig decide;
  std::vector<BenchMethod> methods;

  /// Methods compared in the regret figure: DF2, two-stage with C = 1, 3
  /// and a point estimate, and the policy network.
  static std::vector<BenchMethod> default_methods(const std::string& suite);
  /// Frozen-value DF2 and the J = 5 action-sample variant next to DF2.
  static std::vector<BenchMethod> ablation_methods(const std::string& suite);

  static BenchConfig defaults(const std::string& suite);
  /// Smaller attention/epoch settings used by the acceptance checks.
  void apply_overrides(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct MethodSummary {
  std::string name;
  std::vector<double> gaps;   // one per seed
  std::vector<double> costs;  // mean realized cost per seed
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double spread = 0.0;  // max - min
  double mean = 0.0;
  double std = 0.0;
  double stderr_ = 0.0;
};

struct BenchReport {
  std::string suite;
  nlohmann::json config;
  std::string fingerprint;
  double oracle_mean_expected = 0.0;
  int test_rows = 0;
  std::vector<MethodSummary> methods;
  double runtime_seconds = 0.0;  // not part of to_json(): reports stay byte-identical

  const MethodSummary& method(const std::string& name) const;
  nlohmann::json to_json() const;
  void write_table(std::ostream& os) const;
};

BenchReport run_bench(const BenchConfig& cfg, std::ostream* progress = nullptr);

double median(std::vector<double> v);

}  // namespace df2
