#include "df2/evaluation.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <ostream>

#include "df2/samplers.hpp"

namespace df2 {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t hash_vec(const Vec& x, std::uint64_t seed) {
  return fnv1a(x.data(), sizeof(double) * static_cast<std::size_t>(x.size()), 1469598103934665603ULL ^ seed);
}

}  // namespace

std::string fingerprint(const nlohmann::json& config) {
  const std::string s = config.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return buf;
}

// ---------------------------------------------------------------------------

McExpectation::McExpectation(GmmGenerator gen, ObjectivePtr objective, int n_mc, std::uint64_t seed)
    : gen_(std::move(gen)), objective_(std::move(objective)), n_mc_(n_mc), seed_(seed) {
  gen_.validate();
  if (!objective_) throw ConfigError("mc oracle: objective is required");
  if (n_mc_ < 1) throw ConfigError("mc oracle: n_mc must be >= 1");
  if (gen_.y_dim() != objective_->outcome_dim()) throw DimensionError("mc oracle: generator y dim != outcome dim");
}

const Mat& McExpectation::draws(const Vec& x) const {
  if (cached_x_.size() != x.size() || cached_x_ != x) {
    if (x.size() != gen_.x_dim()) throw DimensionError("mc oracle: x dim mismatch");
    Rng rng(hash_vec(x, seed_));
    cached_y_ = gen_.sample_y(x, n_mc_, rng);
    cached_x_ = x;
  }
  return cached_y_;
}

double McExpectation::value(const Vec& x, const Vec& a) const {
  Vec f;
  objective_->cost_rows(draws(x), a, f);
  return f.mean();
}

Vec McExpectation::grad(const Vec& x, const Vec& a) const {
  const Mat& Y = draws(x);
  return objective_->weighted_grad_a_rows(Y, a, Vec::Constant(Y.rows(), 1.0 / static_cast<double>(Y.rows())));
}

nlohmann::json McExpectation::to_json() const {
  return {{"type", "mc"}, {"n_mc", n_mc_}, {"seed", seed_}};
}

// ---------------------------------------------------------------------------

namespace {

double normal_pdf(double z) { return 0.3989422804014327 * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Partial moments of u ~ N(m, s^2): E[u+], E[u+^2], E[(-u)+], E[(-u)+^2].
struct Moments {
  double pos1, pos2, neg1, neg2;
  double cdf_pos, cdf_neg;  // P(u > 0), P(u < 0)
};

Moments partial_moments(double m, double s) {
  if (s <= 0.0) {
    const double p = std::max(m, 0.0);
    const double n = std::max(-m, 0.0);
    return {p, p * p, n, n * n, m > 0 ? 1.0 : 0.0, m < 0 ? 1.0 : 0.0};
  }
  const double z = m / s;
  const double Phi = normal_cdf(z);
  const double Phin = normal_cdf(-z);
  const double phi = normal_pdf(z);
  return {m * Phi + s * phi, (m * m + s * s) * Phi + m * s * phi, -m * Phin + s * phi,
          (m * m + s * s) * Phin - m * s * phi, Phi, Phin};
}

}  // namespace

bool ExactGmmExpectation::supports(const TaskObjective& objective) {
  const auto* o = dynamic_cast<const Objective*>(&objective);
  if (!o) return false;
  return !std::holds_alternative<WindBidding>(o->kind());
}

ExactGmmExpectation::ExactGmmExpectation(GmmGenerator gen, ObjectivePtr objective)
    : gen_(std::move(gen)), objective_(std::move(objective)) {
  gen_.validate();
  if (!objective_ || !supports(*objective_)) {
    throw ConfigError("exact oracle: only synthetic-convex, synthetic-nonconvex and inventory are supported");
  }
  if (gen_.y_dim() != objective_->outcome_dim()) throw DimensionError("exact oracle: generator y dim != outcome dim");
  const auto& kind = static_cast<const Objective&>(*objective_).kind();
  if (std::holds_alternative<SyntheticConvex>(kind)) coef_ = {5.0, 20.0, 0.5, 0.2, 0.0};
  if (std::holds_alternative<SyntheticNonconvex>(kind)) coef_ = {0.0, 0.0, 10.0, 2.0, 4.0};
  if (std::holds_alternative<Inventory>(kind)) coef_ = {20.0, 5.0, 1.0, 1.0, 0.0};
}

double ExactGmmExpectation::value(const Vec& x, const Vec& a) const {
  if (a.size() != objective_->decision_dim()) throw DimensionError("exact oracle: action dim mismatch");
  const double s = std::sqrt(gen_.variance);
  double total = 0.0;
  for (std::size_t k = 0; k < gen_.A.size(); ++k) {
    const Vec mu = gen_.component_mean(static_cast<int>(k), x);
    double part = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Moments mo = partial_moments(mu[i] - a[i], s);
      part += coef_[0] * mo.pos1 + coef_[1] * mo.neg1 + coef_[2] * mo.pos2 + coef_[3] * mo.neg2;
    }
    total += gen_.weights[static_cast<Eigen::Index>(k)] * part;
  }
  return total + coef_[4] * a.array().cube().sum();
}

Vec ExactGmmExpectation::grad(const Vec& x, const Vec& a) const {
  if (a.size() != objective_->decision_dim()) throw DimensionError("exact oracle: action dim mismatch");
  const double s = std::sqrt(gen_.variance);
  Vec out = Vec::Zero(a.size());
  for (std::size_t k = 0; k < gen_.A.size(); ++k) {
    const Vec mu = gen_.component_mean(static_cast<int>(k), x);
    const double w = gen_.weights[static_cast<Eigen::Index>(k)];
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      const Moments mo = partial_moments(mu[i] - a[i], s);
      out[i] += w * (-coef_[0] * mo.cdf_pos + coef_[1] * mo.cdf_neg - 2.0 * coef_[2] * mo.pos1 +
                     2.0 * coef_[3] * mo.neg1);
    }
  }
  return out + 3.0 * coef_[4] * a.cwiseAbs2();
}

nlohmann::json ExactGmmExpectation::to_json() const { return {{"type", "exact"}}; }

// ---------------------------------------------------------------------------

OracleResult oracle_decision(const Vec& x, const TrueExpectation& truth, const FeasibleSet& set,
                             const PgdConfig& solver, int restarts, std::uint64_t seed) {
  if (restarts < 1) throw ConfigError("oracle: restarts must be >= 1");
  auto value = [&](const Vec& a) { return truth.value(x, a); };
  auto grad = [&](const Vec& a) { return truth.grad(x, a); };
  const SolveResult res = multistart_minimize(set, value, grad, solver, restarts, seed);
  return {res.a, res.value};
}

OracleResult oracle_decision(const Vec& x, const GmmGenerator& gen, ObjectivePtr objective, int n_mc,
                             const PgdConfig& solver, std::uint64_t seed) {
  const FeasibleSet set = objective->feasible();
  McExpectation truth(gen, std::move(objective), n_mc, seed);
  return oracle_decision(x, truth, set, solver, 5, seed);
}

// ---------------------------------------------------------------------------

nlohmann::json RegretReport::to_json(bool per_sample, bool include_runtime) const {
  nlohmann::json j = {{"n", index.size()},
                      {"mean_cost", mean_cost},
                      {"has_oracle", has_oracle},
                      {"infeasible", infeasible},
                      {"fingerprint", fingerprint},
                      {"config", config}};
  if (has_oracle) {
    j["mean_oracle_cost"] = mean_oracle_cost;
    j["mean_gap"] = mean_gap;
    j["gap_std"] = gap_std;
    j["gap_stderr"] = gap_stderr;
  }
  if (include_runtime) j["runtime_seconds"] = runtime_seconds;
  if (per_sample) {
    j["index"] = index;
    j["realized"] = realized;
    if (has_oracle) {
      j["oracle_realized"] = oracle_realized;
      j["expected"] = expected;
      j["oracle_expected"] = oracle_expected;
      j["gap"] = gap;
    }
  }
  return j;
}

std::vector<int> evaluation_rows(const Dataset& ds) {
  auto rows = ds.indices(Split::Test);
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(ds.size()));
    std::iota(rows.begin(), rows.end(), 0);
  }
  return rows;
}

std::vector<OracleResult> oracle_table(const Dataset& ds, const std::vector<int>& rows, const TrueExpectation& truth,
                                       const FeasibleSet& set, const PgdConfig& solver, int restarts,
                                       std::uint64_t seed) {
  std::vector<OracleResult> out;
  out.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.push_back(oracle_decision(ds.x.row(rows[k]).transpose(), truth, set, solver, restarts, seed + k));
  }
  return out;
}

RegretReport decision_regret(const std::vector<Vec>& decisions, const Dataset& ds, const std::vector<int>& rows,
                             const TaskObjective& objective, const TrueExpectation* truth,
                             const std::vector<OracleResult>* oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  if (decisions.size() != rows.size()) throw DimensionError("regret: one decision per evaluated row is required");
  if (oracle && oracle->size() != rows.size()) throw DimensionError("regret: oracle table size mismatch");
  if (ds.y_dim() != objective.outcome_dim()) throw DimensionError("regret: dataset y dim != outcome dim");
  RegretReport rep;
  rep.has_oracle = truth && oracle;
  rep.index = rows;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const Vec& a = decisions[k];
    if (a.size() != objective.decision_dim()) {
      throw DimensionError("regret: decision " + std::to_string(k) + " has wrong dimension");
    }
    if (!objective.feasible().contains(a, 1e-8)) rep.infeasible.push_back(rows[k]);
    const Vec x = ds.x.row(rows[k]).transpose();
    const Vec y = ds.y.row(rows[k]).transpose();
    rep.realized.push_back(objective.cost(y, a));
    if (rep.has_oracle) {
      const OracleResult& o = (*oracle)[k];
      rep.oracle_realized.push_back(objective.cost(y, o.a));
      rep.expected.push_back(truth->value(x, a));
      rep.oracle_expected.push_back(o.expected_cost);
      rep.gap.push_back(rep.expected.back() - o.expected_cost);
    }
  }
  const double n = static_cast<double>(rows.size());
  auto mean = [n](const std::vector<double>& v) { return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / n; };
  rep.mean_cost = mean(rep.realized);
  if (rep.has_oracle) {
    rep.mean_oracle_cost = mean(rep.oracle_realized);
    rep.mean_gap = mean(rep.gap);
    if (rows.size() > 1) {
      double ss = 0.0;
      for (double gp : rep.gap) ss += (gp - rep.mean_gap) * (gp - rep.mean_gap);
      rep.gap_std = std::sqrt(ss / (n - 1.0));
      rep.gap_stderr = rep.gap_std / std::sqrt(n);
    }
  }
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

RegretReport decision_regret(const Decider& decider, const Dataset& ds, const TaskObjective& objective,
                             const TrueExpectation* truth, const std::vector<OracleResult>* oracle) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = evaluation_rows(ds);
  std::vector<Vec> decisions;
  decisions.reserve(rows.size());
  for (int r : rows) decisions.push_back(decider(ds.x.row(r).transpose()));
  RegretReport rep = decision_regret(decisions, ds, rows, objective, truth, oracle);
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// ---------------------------------------------------------------------------

Mat landscape_grid(const std::function<double(const Vec&)>& value, const Box& box, int resolution) {
  if (box.lower.size() != 2) throw DimensionError("landscape: decision space must be 2D");
  if (resolution < 2) throw ConfigError("landscape: resolution must be >= 2");
  Mat out(resolution * resolution, 3);
  int r = 0;
  for (int i = 0; i < resolution; ++i) {
    for (int j = 0; j < resolution; ++j) {
      Vec a(2);
      a[0] = box.lower[0] + (box.upper[0] - box.lower[0]) * i / (resolution - 1);
      a[1] = box.lower[1] + (box.upper[1] - box.lower[1]) * j / (resolution - 1);
      out(r, 0) = a[0];
      out(r, 1) = a[1];
      out(r, 2) = value(a);
      ++r;
    }
  }
  return out;
}

void write_landscape_csv(std::ostream& os, const Mat& grid) {
  os << "a1,a2,value\n";
  char buf[96];
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", grid(r, 0), grid(r, 1), grid(r, 2));
    os << buf;
  }
}

double pearson(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() < 2) throw DimensionError("pearson: need two equal-length vectors (n >= 2)");
  const Vec da = a.array() - a.mean();
  const Vec db = b.array() - b.mean();
  const double den = da.norm() * db.norm();
  if (den == 0.0) throw NumericError("pearson: constant input");
  return da.dot(db) / den;
}

// ---------------------------------------------------------------------------

BiasVariance bias_variance_probe(const ModelFamily& family, const GmmGenerator& gen, const TrueExpectation& truth,
                                 const FeasibleSet& set, int trials, int n_train, std::uint64_t seed, int probes) {
  if (trials < 1) throw ConfigError("bias-variance: trials must be >= 1");
  if (n_train < 1) throw ConfigError("bias-variance: n_train must be >= 1");
  if (probes < 1) throw ConfigError("bias-variance: probes must be >= 1");
  Rng rng(seed);
  std::uniform_real_distribution<double> ux(gen.x_low, gen.x_high);
  std::vector<Vec> px, pa;
  Vec target(probes);
  const Mat actions = sample_feasible(set, probes, rng);
  for (int p = 0; p < probes; ++p) {
    Vec x(gen.x_dim());
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = ux(rng);
    px.push_back(x);
    pa.push_back(actions.row(p).transpose());
    target[p] = truth.value(x, pa.back());
  }
  Mat preds(trials, probes);
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t data_seed = seed + 1000003ULL * static_cast<std::uint64_t>(t + 1);
    const Dataset ds = generate(gen, n_train, data_seed);
    const Predictor fit = family(ds, data_seed);
    for (int p = 0; p < probes; ++p) preds(t, p) = fit(px[static_cast<std::size_t>(p)], pa[static_cast<std::size_t>(p)]);
  }
  BiasVariance out;
  out.probes = probes;
  out.trials = trials;
  const Vec mean_fit = preds.colwise().mean().transpose();
  out.bias2 = (mean_fit - target).squaredNorm() / probes;
  out.variance = (preds.rowwise() - mean_fit.transpose()).squaredNorm() / (static_cast<double>(trials) * probes);
  out.mse = (preds.rowwise() - target.transpose()).squaredNorm() / (static_cast<double>(trials) * probes);
  return out;
}

namespace {

// [1, x, a, x*x, a*a, x (x) a] without duplicate cross terms
Vec quadratic_features(const Vec& x, const Vec& a) {
  Vec z(x.size() + a.size());
  z << x, a;
  const Eigen::Index n = z.size();
  Vec f(1 + n + n * (n + 1) / 2);
  f[0] = 1.0;
  f.segment(1, n) = z;
  Eigen::Index k = 1 + n;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) f[k++] = z[i] * z[j];
  }
  return f;
}

}  // namespace

ModelFamily linear_feature_family(ObjectivePtr objective, int actions, double ridge) {
  if (actions < 1) throw ConfigError("linear family: actions must be >= 1");
  return [objective, actions, ridge](const Dataset& ds, std::uint64_t seed) -> Predictor {
    Rng rng(seed);
    const Vec probe_f = quadratic_features(Vec::Zero(ds.x_dim()), Vec::Zero(objective->decision_dim()));
    const Eigen::Index p = probe_f.size();
    Mat gram = Mat::Zero(p, p);
    Vec rhs = Vec::Zero(p);
    for (int i = 0; i < ds.size(); ++i) {
      const Mat acts = sample_feasible(objective->feasible(), actions, rng);
      const Vec x = ds.x.row(i).transpose();
      const Vec y = ds.y.row(i).transpose();
      for (int j = 0; j < actions; ++j) {
        const Vec a = acts.row(j).transpose();
        const Vec phi = quadratic_features(x, a);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(phi);
        rhs += objective->cost(y, a) * phi;
      }
    }
    Mat full = gram.selfadjointView<Eigen::Lower>();
    full.diagonal().array() += ridge;
    const Vec theta = full.ldlt().solve(rhs);
    if (!theta.allFinite()) throw NumericError("linear family: least-squares solve failed");
    return [theta](const Vec& x, const Vec& a) { return quadratic_features(x, a).dot(theta); };
  };
}

}  // namespace df2
