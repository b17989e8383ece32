#include "df2/simdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace df2 {

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split tag '" + s + "'");
}

void Dataset::validate() const {
  if (x.rows() != y.rows()) throw DimensionError("dataset: x and y row counts differ");
  if (static_cast<Eigen::Index>(split.size()) != x.rows()) throw DimensionError("dataset: split tags do not cover records");
}

std::vector<int> Dataset::indices(Split s) const {
  std::vector<int> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == s) out.push_back(static_cast<int>(i));
  }
  return out;
}

int Dataset::count(Split s) const { return static_cast<int>(std::count(split.begin(), split.end(), s)); }

bool operator==(const Dataset& a, const Dataset& b) {
  return a.x.rows() == b.x.rows() && a.x.cols() == b.x.cols() && a.y.cols() == b.y.cols() && a.x == b.x &&
         a.y == b.y && a.split == b.split;
}

// ---------------------------------------------------------------------------

GmmGenerator GmmGenerator::three_component(int x_dim, int y_dim, std::uint64_t seed) {
  if (x_dim < 1 || y_dim < 1) throw ConfigError("generator dims must be >= 1");
  GmmGenerator g;
  g.weights = Vec(3);
  g.weights << 0.3, 0.3, 0.4;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 3; ++k) {
    Mat a(y_dim, x_dim);
    for (int r = 0; r < y_dim; ++r) {
      for (int c = 0; c < x_dim; ++c) a(r, c) = u(rng);
    }
    g.A.push_back(a);
  }
  return g;
}

void GmmGenerator::validate() const {
  if (weights.size() < 1 || static_cast<std::size_t>(weights.size()) != A.size()) {
    throw ConfigError("generator: need one matrix per mixture weight");
  }
  if ((weights.array() < 0).any() || std::abs(weights.sum() - 1.0) > 1e-9) {
    throw ConfigError("generator: weights must be >= 0 and sum to 1");
  }
  for (const auto& a : A) {
    if (a.rows() != A.front().rows() || a.cols() != A.front().cols()) throw DimensionError("generator: ragged A");
  }
  if (!(variance >= 0.0)) throw ConfigError("generator: variance must be >= 0");
  if (!(x_low < x_high)) throw ConfigError("generator: x_low must be < x_high");
}

Vec GmmGenerator::conditional_mean(const Vec& x) const {
  Vec m = Vec::Zero(y_dim());
  for (std::size_t k = 0; k < A.size(); ++k) m += weights[static_cast<Eigen::Index>(k)] * (A[k] * x);
  return m;
}

Vec GmmGenerator::sample_y(const Vec& x, Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pick = u(rng);
  int k = 0;
  double acc = weights[0];
  while (pick > acc && k + 1 < weights.size()) acc += weights[++k];
  Vec y = A[static_cast<std::size_t>(k)] * x;
  const double sd = std::sqrt(variance);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += sd * normal(rng);
  return y;
}

Mat GmmGenerator::sample_y(const Vec& x, int n, Rng& rng) const {
  Mat out(n, y_dim());
  for (int r = 0; r < n; ++r) out.row(r) = sample_y(x, rng).transpose();
  return out;
}

nlohmann::json GmmGenerator::to_json() const {
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& a : A) {
    std::vector<double> flat;
    for (int r = 0; r < a.rows(); ++r) {
      for (int c = 0; c < a.cols(); ++c) flat.push_back(a(r, c));
    }
    mats.push_back({{"rows", a.rows()}, {"cols", a.cols()}, {"data", flat}});
  }
  return {{"weights", std::vector<double>(weights.data(), weights.data() + weights.size())},
          {"A", mats},
          {"variance", variance},
          {"x_low", x_low},
          {"x_high", x_high}};
}

GmmGenerator GmmGenerator::from_json(const nlohmann::json& j) {
  try {
    GmmGenerator g;
    const auto w = j.at("weights").get<std::vector<double>>();
    g.weights = Eigen::Map<const Vec>(w.data(), static_cast<Eigen::Index>(w.size()));
    for (const auto& jm : j.at("A")) {
      const int rows = jm.at("rows").get<int>();
      const int cols = jm.at("cols").get<int>();
      const auto d = jm.at("data").get<std::vector<double>>();
      if (static_cast<int>(d.size()) != rows * cols) throw DimensionError("generator: A data size mismatch");
      Mat a(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) a(r, c) = d[static_cast<std::size_t>(r * cols + c)];
      }
      g.A.push_back(a);
    }
    g.variance = j.at("variance").get<double>();
    g.x_low = j.value("x_low", -1.0);
    g.x_high = j.value("x_high", 1.0);
    g.validate();
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generator: ") + e.what());
  }
}

Dataset generate(const GmmGenerator& gen, int n, std::uint64_t seed) {
  gen.validate();
  if (n < 1) throw ConfigError("generate: n must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(gen.x_low, gen.x_high);
  Dataset ds;
  ds.x.resize(n, gen.x_dim());
  ds.y.resize(n, gen.y_dim());
  for (int r = 0; r < n; ++r) {
    Vec x(gen.x_dim());
    for (Eigen::Index c = 0; c < x.size(); ++c) x[c] = ux(rng);
    ds.x.row(r) = x.transpose();
    ds.y.row(r) = gen.sample_y(x, rng).transpose();
  }
  ds.split.assign(static_cast<std::size_t>(n), Split::Train);
  ds.provenance = {{"generator_type", "gmm"}, {"generator", gen.to_json()}, {"n", n}, {"seed", seed}};
  return ds;
}

Dataset split(Dataset ds, const std::array<double, 3>& ratios, std::uint64_t seed) {
  ds.validate();
  for (double r : ratios) {
    if (!(r >= 0.0) || r > 1.0) throw ConfigError("split: ratios must lie in [0, 1]");
  }
  if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) throw ConfigError("split: ratios must sum to 1");
  const int n = ds.size();
  const int n_val = static_cast<int>(std::floor(n * ratios[1] + 1e-9));
  const int n_test = static_cast<int>(std::floor(n * ratios[2] + 1e-9));
  const int n_train = n - n_val - n_test;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  ds.split.assign(static_cast<std::size_t>(n), Split::Train);
  for (int k = 0; k < n; ++k) {
    const Split s = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    ds.split[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = s;
  }
  ds.provenance["split"] = {{"ratios", ratios}, {"seed", seed}};
  return ds;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
  std::size_t b = 0;
  while (b < s.size() && s[b] == ' ') ++b;
  return s.substr(b);
}

}  // namespace

void write_csv(std::ostream& os, const Dataset& ds) {
  ds.validate();
  if (!ds.provenance.empty()) os << "# provenance: " << ds.provenance.dump() << '\n';
  for (int i = 0; i < ds.x_dim(); ++i) os << "x_" << i << ',';
  for (int i = 0; i < ds.y_dim(); ++i) os << "y_" << i << ',';
  os << "split\n";
  char buf[32];
  for (int r = 0; r < ds.size(); ++r) {
    for (int i = 0; i < ds.x_dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.x(r, i));
      os << buf << ',';
    }
    for (int i = 0; i < ds.y_dim(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.y(r, i));
      os << buf << ',';
    }
    os << to_string(ds.split[static_cast<std::size_t>(r)]) << '\n';
  }
}

Dataset read_csv(std::istream& is) {
  Dataset ds;
  std::string line;
  bool have_header = false;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    line = trim(line);
    if (line.empty()) continue;
    if (line.rfind("# provenance:", 0) == 0) {
      try {
        ds.provenance = nlohmann::json::parse(line.substr(13));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("dataset csv: bad provenance line: ") + e.what());
      }
      continue;
    }
    if (line[0] == '#') continue;
    header = split_fields(line);
    have_header = true;
    break;
  }
  if (!have_header) throw ConfigError("dataset csv: missing header line");

  int p = 0, m = 0;
  for (const auto& h : header) {
    if (h.rfind("x_", 0) == 0) ++p;
    if (h.rfind("y_", 0) == 0) ++m;
  }
  std::vector<int> xcol(static_cast<std::size_t>(p)), ycol(static_cast<std::size_t>(m));
  int split_col = -1;
  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("dataset csv: missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  for (int i = 0; i < p; ++i) xcol[static_cast<std::size_t>(i)] = find_col("x_" + std::to_string(i));
  for (int i = 0; i < m; ++i) ycol[static_cast<std::size_t>(i)] = find_col("y_" + std::to_string(i));
  split_col = find_col("split");
  if (p == 0) throw ConfigError("dataset csv: missing column 'x_0'");
  if (m == 0) throw ConfigError("dataset csv: missing column 'y_0'");

  std::vector<std::vector<double>> xs, ys;
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_fields(line);
    if (f.size() != header.size()) {
      throw DimensionError("dataset csv: row " + std::to_string(line_no) + " has " + std::to_string(f.size()) +
                           " fields, header has " + std::to_string(header.size()));
    }
    auto parse = [&](int col) {
      try {
        std::size_t used = 0;
        const double v = std::stod(f[static_cast<std::size_t>(col)], &used);
        if (used != f[static_cast<std::size_t>(col)].size()) throw std::invalid_argument("trailing characters");
        return v;
      } catch (const std::exception&) {
        throw ConfigError("dataset csv: row " + std::to_string(line_no) + ", column '" +
                          header[static_cast<std::size_t>(col)] + "' is not a number");
      }
    };
    std::vector<double> xr, yr;
    for (int c : xcol) xr.push_back(parse(c));
    for (int c : ycol) yr.push_back(parse(c));
    xs.push_back(std::move(xr));
    ys.push_back(std::move(yr));
    ds.split.push_back(split_from_string(f[static_cast<std::size_t>(split_col)]));
  }
  ds.x.resize(static_cast<Eigen::Index>(xs.size()), p);
  ds.y.resize(static_cast<Eigen::Index>(ys.size()), m);
  for (std::size_t r = 0; r < xs.size(); ++r) {
    for (int i = 0; i < p; ++i) ds.x(static_cast<Eigen::Index>(r), i) = xs[r][static_cast<std::size_t>(i)];
    for (int i = 0; i < m; ++i) ds.y(static_cast<Eigen::Index>(r), i) = ys[r][static_cast<std::size_t>(i)];
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_csv(os, ds);
  if (!os) throw ConfigError("failed writing '" + path + "'");
}

Dataset load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open dataset '" + path + "'");
  return read_csv(is);
}

// ---------------------------------------------------------------------------
// Time-series stand-ins

namespace {

constexpr double kPi = 3.14159265358979323846;

Dataset wind_series(int n, std::uint64_t seed, const TimeseriesConfig& cfg) {
  const int stride = std::max(cfg.stride, 1);
  const int length = n * stride + 48;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // two wind regimes with Markov switching; AR(1) deviations on top
  bool windy = false;
  double ar = 0.0;
  std::vector<double> s(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) {
    if (cfg.noise > 0 && u(rng) < 0.04) windy = !windy;
    ar = 0.85 * ar + cfg.noise * 0.25 * normal(rng);
    const double level = windy ? 2.6 : 1.0;
    const double v = level + 0.5 * std::sin(2.0 * kPi * t / 24.0) + ar;
    s[static_cast<std::size_t>(t)] = std::clamp(v, 0.0, 4.0);
  }
  Dataset ds;
  ds.x.resize(n, 24);
  ds.y.resize(n, 12);
  for (int r = 0; r < n; ++r) {
    const int t0 = r * stride;
    for (int h = 0; h < 24; ++h) ds.x(r, h) = s[static_cast<std::size_t>(t0 + h)];
    for (int h = 0; h < 12; ++h) ds.y(r, h) = s[static_cast<std::size_t>(t0 + 24 + 12 + h)];
  }
  return ds;
}

Dataset inventory_series(int n, std::uint64_t seed, const TimeseriesConfig& cfg) {
  const int stride = std::max(cfg.stride, 1);
  const int length = n * stride + 28;
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double ar = 0.0;
  std::vector<double> s(static_cast<std::size_t>(length));
  for (int t = 0; t < length; ++t) {
    ar = 0.7 * ar + cfg.noise * 0.25 * normal(rng);
    const bool promo = cfg.noise > 0 && u(rng) < 0.1;
    const double v = 1.2 * (1.0 + 0.3 * std::sin(2.0 * kPi * t / 7.0)) + ar + (promo ? 1.0 : 0.0);
    s[static_cast<std::size_t>(t)] = std::max(v, 0.0);
  }
  Dataset ds;
  ds.x.resize(n, 14);
  ds.y.resize(n, 7);
  for (int r = 0; r < n; ++r) {
    const int t0 = r * stride;
    for (int d = 0; d < 14; ++d) ds.x(r, d) = s[static_cast<std::size_t>(t0 + d)];
    for (int d = 0; d < 7; ++d) ds.y(r, d) = s[static_cast<std::size_t>(t0 + 14 + 7 + d)];
  }
  return ds;
}

Dataset od_series(int n, std::uint64_t seed, const TimeseriesConfig& cfg) {
  const int K = cfg.regions;
  if (K < 2) throw ConfigError("od series needs at least 2 regions");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec population(K), px(K), py(K);
  for (int k = 0; k < K; ++k) {
    population[k] = std::round((0.5 + 1.5 * u(rng)) * 1e6);
    px[k] = u(rng);
    py[k] = u(rng);
  }
  // gravity weights, scaled so that about 3% of a region travels per day
  Mat gravity = Mat::Zero(K, K);
  for (int i = 0; i < K; ++i) {
    for (int j = 0; j < K; ++j) {
      if (i == j) continue;
      const double d = std::hypot(px[i] - px[j], py[i] - py[j]) + 0.1;
      gravity(i, j) = population[j] / (d * d);
    }
    gravity.row(i) *= 0.03 * population[i] / gravity.row(i).sum();
  }
  const std::array<double, 7> weekday{1.0, 1.0, 1.0, 1.0, 1.1, 0.6, 0.6};
  const int weeks = n + 1;
  std::vector<Vec> flows;
  double level = 0.0;  // log of the week-level mobility factor, AR(1)
  for (int w = 0; w < weeks; ++w) {
    level = 0.6 * level + cfg.noise * 0.3 * normal(rng);
    Vec f(static_cast<Eigen::Index>(K) * K * 7);
    for (int t = 0; t < 7; ++t) {
      for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
          const double noise = std::exp(cfg.noise * 0.15 * normal(rng));
          f[(static_cast<Eigen::Index>(t) * K + i) * K + j] = gravity(i, j) * weekday[static_cast<std::size_t>(t)] *
                                                                std::exp(level) * noise;
        }
      }
    }
    flows.push_back(std::move(f));
  }
  Dataset ds;
  const auto dim = static_cast<Eigen::Index>(K) * K * 7;
  ds.x.resize(n, dim);
  ds.y.resize(n, dim);
  for (int r = 0; r < n; ++r) {
    ds.x.row(r) = flows[static_cast<std::size_t>(r)].transpose();
    ds.y.row(r) = flows[static_cast<std::size_t>(r + 1)].transpose();
  }
  ds.provenance["od"] = {{"regions", K},
                         {"days", 7},
                         {"layout", "day-major (t*K+i)*K+j"},
                         {"population", std::vector<double>(population.data(), population.data() + K)}};
  return ds;
}

}  // namespace

Dataset synth_timeseries(SeriesTask task, int n, std::uint64_t seed, const TimeseriesConfig& cfg) {
  if (n < 1) throw ConfigError("synth_timeseries: n must be >= 1");
  if (!(cfg.noise >= 0.0)) throw ConfigError("synth_timeseries: noise must be >= 0");
  Dataset ds;
  std::string name;
  switch (task) {
    case SeriesTask::Wind:
      ds = wind_series(n, seed, cfg);
      name = "wind";
      break;
    case SeriesTask::Inventory:
      ds = inventory_series(n, seed, cfg);
      name = "inventory";
      break;
    case SeriesTask::OriginDestination:
      ds = od_series(n, seed, cfg);
      name = "od";
      break;
  }
  ds.split.assign(static_cast<std::size_t>(n), Split::Train);
  ds.provenance["generator_type"] = "timeseries";
  ds.provenance["series"] = name;
  ds.provenance["n"] = n;
  ds.provenance["seed"] = seed;
  ds.provenance["series_config"] = {{"noise", cfg.noise}, {"regions", cfg.regions}, {"stride", cfg.stride}};
  return ds;
}

// ---------------------------------------------------------------------------

FeatureScaler FeatureScaler::identity(int dim) { return {Vec::Zero(dim), Vec::Ones(dim)}; }

FeatureScaler FeatureScaler::fit(const Dataset& ds) {
  const auto train = ds.indices(Split::Train);
  if (train.empty()) throw ConfigError("feature scaler: empty training split");
  FeatureScaler s{Vec::Zero(ds.x_dim()), Vec::Zero(ds.x_dim())};
  for (int i : train) s.mean += ds.x.row(i).transpose();
  s.mean /= static_cast<double>(train.size());
  for (int i : train) s.scale += (ds.x.row(i).transpose() - s.mean).cwiseAbs2();
  s.scale = (s.scale / static_cast<double>(train.size())).cwiseSqrt();
  for (Eigen::Index i = 0; i < s.scale.size(); ++i) {
    if (s.scale[i] < 1e-12) s.scale[i] = 1.0;
  }
  return s;
}

Vec FeatureScaler::apply(const Vec& x) const {
  if (!is_fitted()) return x;
  if (x.size() != mean.size()) throw DimensionError("feature scaler: input dim mismatch");
  return (x - mean).cwiseQuotient(scale);
}

nlohmann::json FeatureScaler::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"scale", std::vector<double>(scale.data(), scale.data() + scale.size())}};
}

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
  const auto m = j.at("mean").get<std::vector<double>>();
  const auto s = j.at("scale").get<std::vector<double>>();
  if (m.size() != s.size()) throw DimensionError("feature scaler: mean/scale length mismatch");
  return {Eigen::Map<const Vec>(m.data(), static_cast<Eigen::Index>(m.size())),
          Eigen::Map<const Vec>(s.data(), static_cast<Eigen::Index>(s.size()))};
}

}  // namespace df2
