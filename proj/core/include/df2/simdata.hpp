#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "df2/learncore.hpp"
#include "df2/samplers.hpp"

namespace df2 {

enum class Split : std::uint8_t { Train, Val, Test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

/// Paired (x, y) records with split tags and the config that produced them.
struct Dataset {
  Mat x;  // N x p
  Mat y;  // N x m
  std::vector<Split> split;
  nlohmann::json provenance = nlohmann::json::object();

  int size() const { return static_cast<int>(x.rows()); }
  int x_dim() const { return static_cast<int>(x.cols()); }
  int y_dim() const { return static_cast<int>(y.cols()); }
  bool empty() const { return size() == 0; }
  void validate() const;
  std::vector<int> indices(Split s) const;
  int count(Split s) const;
};

bool operator==(const Dataset& a, const Dataset& b);

/// y | x ~ sum_k w_k N(A_k x, variance * I), x ~ U[x_low, x_high]^p.
struct GmmGenerator {
  Vec weights;
  std::vector<Mat> A;  // each m x p
  double variance = 0.1;
  double x_low = -1.0;
  double x_high = 1.0;

  /// Three components with weights (0.3, 0.3, 0.4), A entries ~ U[0,1].
  static GmmGenerator three_component(int x_dim, int y_dim, std::uint64_t seed);

  int x_dim() const { return static_cast<int>(A.front().cols()); }
  int y_dim() const { return static_cast<int>(A.front().rows()); }
  void validate() const;
  Vec component_mean(int k, const Vec& x) const { return A[static_cast<std::size_t>(k)] * x; }
  Vec conditional_mean(const Vec& x) const;
  Vec sample_y(const Vec& x, Rng& rng) const;
  Mat sample_y(const Vec& x, int n, Rng& rng) const;

  nlohmann::json to_json() const;
  static GmmGenerator from_json(const nlohmann::json& j);
};

/// n seeded draws; the generator is stored in provenance["generator"].
Dataset generate(const GmmGenerator& gen, int n, std::uint64_t seed);

/// Seeded shuffle then contiguous train/val/test blocks. Val and test sizes
/// are floor(n * ratio); the remainder goes to train.
Dataset split(Dataset ds, const std::array<double, 3>& ratios, std::uint64_t seed);

/// CSV: optional "# provenance: {json}" line, header x_0..,y_0..,split.
void save_csv(const Dataset& ds, const std::string& path);
Dataset load_csv(const std::string& path);
void write_csv(std::ostream& os, const Dataset& ds);
Dataset read_csv(std::istream& is);

enum class SeriesTask { Wind, Inventory, OriginDestination };

struct TimeseriesConfig {
  double noise = 1.0;  // 0 gives a deterministic series
  int regions = 5;     // OD only
  int stride = 6;      // hours between wind windows / days between inventory windows
};

/// Stand-in generators with the record shapes of the real-data tasks:
/// wind (24 -> 12), inventory (14 -> 7), OD (K*K*7 -> K*K*7).
Dataset synth_timeseries(SeriesTask task, int n, std::uint64_t seed, const TimeseriesConfig& cfg = {});

/// Per-coordinate standardization with statistics from the training split.
struct FeatureScaler {
  Vec mean;
  Vec scale;

  static FeatureScaler identity(int dim);
  static FeatureScaler fit(const Dataset& ds);
  Vec apply(const Vec& x) const;
  bool is_fitted() const { return mean.size() > 0; }
  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);
};

}  // namespace df2
