#include "df2/episim.hpp"

#include <cmath>
#include <ostream>

namespace df2 {

namespace {

// ---------------------------------------------------------------------------
// Scalar types for the templated simulator: double, forward-mode Dual and a
// reverse-mode tape variable. Only the operations the simulator needs.

struct Dual {
  double v = 0.0;
  Vec d;  // empty == constant
  Dual() = default;
  Dual(double x) : v(x) {}  // NOLINT(google-explicit-constructor)
  Dual(double x, Vec dd) : v(x), d(std::move(dd)) {}
};

Vec lincomb(const Vec& a, double ca, const Vec& b, double cb) {
  if (a.size() == 0 && b.size() == 0) return {};
  if (a.size() == 0) return cb * b;
  if (b.size() == 0) return ca * a;
  return ca * a + cb * b;
}

Dual operator+(const Dual& x, const Dual& y) { return {x.v + y.v, lincomb(x.d, 1.0, y.d, 1.0)}; }
Dual operator-(const Dual& x, const Dual& y) { return {x.v - y.v, lincomb(x.d, 1.0, y.d, -1.0)}; }
Dual operator*(const Dual& x, const Dual& y) { return {x.v * y.v, lincomb(x.d, y.v, y.d, x.v)}; }
Dual operator/(const Dual& x, const Dual& y) { return {x.v / y.v, lincomb(x.d, 1.0 / y.v, y.d, -x.v / (y.v * y.v))}; }
Dual& operator+=(Dual& x, const Dual& y) { return x = x + y; }

struct TapeNode {
  int a, b;
  double da, db;
};

struct Tape {
  std::vector<TapeNode> nodes;
  int push(int a, double da, int b, double db) {
    nodes.push_back({a, b, da, db});
    return static_cast<int>(nodes.size()) - 1;
  }
};

thread_local Tape* active_tape = nullptr;

struct Var {
  double v = 0.0;
  int id = -1;  // -1 == constant
  Var() = default;
  Var(double x) : v(x) {}  // NOLINT(google-explicit-constructor)
  static Var input(double x) {
    Var r(x);
    r.id = active_tape->push(-1, 0.0, -1, 0.0);
    return r;
  }
};

Var record(double value, const Var& x, double dx, const Var& y, double dy) {
  Var r(value);
  if (x.id >= 0 || y.id >= 0) r.id = active_tape->push(x.id, dx, y.id, dy);
  return r;
}

Var operator+(const Var& x, const Var& y) { return record(x.v + y.v, x, 1.0, y, 1.0); }
Var operator-(const Var& x, const Var& y) { return record(x.v - y.v, x, 1.0, y, -1.0); }
Var operator*(const Var& x, const Var& y) { return record(x.v * y.v, x, y.v, y, x.v); }
Var operator/(const Var& x, const Var& y) { return record(x.v / y.v, x, 1.0 / y.v, y, -x.v / (y.v * y.v)); }
Var& operator+=(Var& x, const Var& y) { return x = x + y; }

double val(double x) { return x; }
double val(const Dual& x) { return x.v; }
double val(const Var& x) { return x.v; }

template <class T>
struct StateT {
  std::vector<T> S, E, I, R, V;
};

template <class T>
StateT<T> lift(const SeirvState& s) {
  StateT<T> r;
  const auto k = static_cast<std::size_t>(s.regions());
  r.S.resize(k), r.E.resize(k), r.I.resize(k), r.R.resize(k), r.V.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    r.S[i] = s.S[ii], r.E[i] = s.E[ii], r.I[i] = s.I[ii], r.R[i] = s.R[ii], r.V[i] = s.V[ii];
  }
  return r;
}

SeirvState lower(const StateT<double>& s) {
  SeirvState r;
  const auto k = static_cast<Eigen::Index>(s.S.size());
  r.S = Eigen::Map<const Vec>(s.S.data(), k);
  r.E = Eigen::Map<const Vec>(s.E.data(), k);
  r.I = Eigen::Map<const Vec>(s.I.data(), k);
  r.R = Eigen::Map<const Vec>(s.R.data(), k);
  r.V = Eigen::Map<const Vec>(s.V.data(), k);
  return r;
}

// rates[(t*K + i)*K + j]; negative raw flows are treated as zero.
template <class T>
std::vector<T> normalize_t(const std::vector<T>& flows, int K, int D, const Vec& population) {
  std::vector<T> rates(flows.size(), T(0.0));
  for (int t = 0; t < D; ++t) {
    for (int i = 0; i < K; ++i) {
      const auto row = static_cast<std::size_t>((t * K + i) * K);
      T sum(0.0);
      for (int j = 0; j < K; ++j) {
        if (j == i || val(flows[row + j]) <= 0.0) continue;
        rates[row + j] = flows[row + j] / T(population[i]);
        sum += rates[row + j];
      }
      if (val(sum) > 1.0) {
        for (int j = 0; j < K; ++j) {
          if (j != i) rates[row + j] = rates[row + j] / sum;
        }
      }
    }
  }
  return rates;
}

// Scales outflows so that at most `content` leaves a compartment.
template <class T>
T outflow_scale(const T& content, const T& outflow) {
  if (val(outflow) > val(content) && val(outflow) > 0.0) return content / outflow;
  return T(1.0);
}

template <class T>
void step_t(StateT<T>& st, const SeirvParams& p, const T* rates_day, const std::vector<T>& vacc_per_day,
            T* new_infections) {
  const int K = p.regions();
  const T dt(p.dt);
  std::vector<T> infect(K), vac_s(K), vac_e(K), prog(K), rec(K), mob(K);
  std::vector<T> sc_s(K), sc_e(K), sc_i(K), sc_r(K), sc_v(K);
  for (int k = 0; k < K; ++k) {
    infect[k] = T(p.beta[k] / p.population[k]) * st.S[k] * st.I[k] * dt;
    const T se = st.S[k] + st.E[k];
    if (val(se) > 0.0) {
      vac_s[k] = st.S[k] / se * vacc_per_day[k] * dt;
      vac_e[k] = st.E[k] / se * vacc_per_day[k] * dt;
    } else {
      vac_s[k] = T(0.0);
      vac_e[k] = T(0.0);
    }
    prog[k] = T(p.sigma[k]) * st.E[k] * dt;
    rec[k] = T(p.gamma[k]) * st.I[k] * dt;
    T m(0.0);
    for (int j = 0; j < K; ++j) {
      if (j != k) m += rates_day[k * K + j];
    }
    mob[k] = m * dt;
    sc_s[k] = outflow_scale(st.S[k], infect[k] + vac_s[k] + mob[k] * st.S[k]);
    sc_e[k] = outflow_scale(st.E[k], prog[k] + vac_e[k] + mob[k] * st.E[k]);
    sc_i[k] = outflow_scale(st.I[k], rec[k] + mob[k] * st.I[k]);
    sc_r[k] = outflow_scale(st.R[k], mob[k] * st.R[k]);
    sc_v[k] = outflow_scale(st.V[k], mob[k] * st.V[k]);
  }
  StateT<T> next = st;
  for (int k = 0; k < K; ++k) {
    T in_s(0.0), in_e(0.0), in_i(0.0), in_r(0.0), in_v(0.0);
    for (int i = 0; i < K; ++i) {
      if (i == k) continue;
      const T r = rates_day[i * K + k] * dt;
      if (val(r) == 0.0) continue;
      in_s += sc_s[i] * r * st.S[i];
      in_e += sc_e[i] * r * st.E[i];
      in_i += sc_i[i] * r * st.I[i];
      in_r += sc_r[i] * r * st.R[i];
      in_v += sc_v[i] * r * st.V[i];
    }
    const T infected = sc_s[k] * infect[k];
    const T progressed = sc_e[k] * prog[k];
    const T recovered = sc_i[k] * rec[k];
    next.S[k] = st.S[k] - sc_s[k] * (infect[k] + vac_s[k] + mob[k] * st.S[k]) + in_s;
    next.E[k] = st.E[k] - sc_e[k] * (prog[k] + vac_e[k] + mob[k] * st.E[k]) + infected + in_e;
    next.I[k] = st.I[k] - sc_i[k] * (rec[k] + mob[k] * st.I[k]) + progressed + in_i;
    next.R[k] = st.R[k] - sc_r[k] * (mob[k] * st.R[k]) + recovered + in_r;
    next.V[k] = st.V[k] - sc_v[k] * (mob[k] * st.V[k]) + sc_s[k] * vac_s[k] + sc_e[k] * vac_e[k] + in_v;
    // Round-off can leave a -1e-12 residue after a fully drained compartment.
    for (auto* c : {&next.S[k], &next.E[k], &next.I[k], &next.R[k], &next.V[k]}) {
      if (val(*c) < 0.0) *c = T(0.0);
    }
    if (new_infections) *new_infections += progressed;
  }
  st = std::move(next);
}

template <class T>
T simulate_t(const std::vector<T>& rates, int D, const std::vector<T>& vaccines, const SeirvParams& p,
             const SeirvState& init, std::vector<SeirvState>* states) {
  const int K = p.regions();
  StateT<T> st = lift<T>(init);
  std::vector<T> per_day(K);
  for (int k = 0; k < K; ++k) per_day[k] = vaccines[k] / T(static_cast<double>(p.horizon_days));
  T total(0.0);
  const int steps = p.steps();
  for (int n = 0; n < steps; ++n) {
    const int day = static_cast<int>(std::floor(n * p.dt + 1e-9)) % D;
    step_t(st, p, rates.data() + static_cast<std::ptrdiff_t>(day) * K * K, per_day, &total);
    if constexpr (std::is_same_v<T, double>) {
      if (states) states->push_back(lower(st));
    }
  }
  return total;
}

void check_shapes(const OdTensor& od, const Vec& vaccines, const SeirvParams& params, const SeirvState& init) {
  params.validate();
  init.validate();
  if (od.regions() != params.regions() || init.regions() != params.regions() || vaccines.size() != params.regions()) {
    throw DimensionError("SEIRV: region counts of OD tensor, params, state and vaccines differ");
  }
  if (od.days() < 1) throw DimensionError("SEIRV: OD tensor has no days");
  if (!vaccines.allFinite() || !od.flat().allFinite()) throw NumericError("SEIRV: non-finite input");
}

void check_allocation(const Vec& vaccines, double budget) {
  const double tol = 1e-9 * std::max(budget, 1.0);
  if ((vaccines.array() < -tol).any() || vaccines.sum() > budget + tol) {
    throw ConfigError("SEIRV: infeasible vaccine allocation (needs a >= 0 and sum(a) <= budget)");
  }
}

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

// ---------------------------------------------------------------------------

int SeirvParams::steps() const { return static_cast<int>(std::lround(horizon_days / dt)); }

void SeirvParams::validate() const {
  const auto k = population.size();
  if (k < 1) throw ConfigError("seirv: need at least one region");
  if (beta.size() != k || sigma.size() != k || gamma.size() != k) {
    throw DimensionError("seirv: beta/sigma/gamma/population lengths differ");
  }
  if ((beta.array() < 0).any() || (sigma.array() < 0).any() || (gamma.array() < 0).any()) {
    throw ConfigError("seirv: rates must be >= 0");
  }
  if ((population.array() <= 0).any()) throw ConfigError("seirv: populations must be > 0");
  if (!(dt > 0.0)) throw ConfigError("seirv: dt must be > 0");
  if (horizon_days < 1 || std::abs(horizon_days / dt - std::round(horizon_days / dt)) > 1e-9) {
    throw ConfigError("seirv: horizon must be a positive multiple of dt");
  }
}

nlohmann::json SeirvParams::to_json() const {
  return {{"beta", to_std(beta)},           {"sigma", to_std(sigma)}, {"gamma", to_std(gamma)},
          {"population", to_std(population)}, {"horizon_days", horizon_days}, {"dt", dt}};
}

SeirvParams SeirvParams::from_json(const nlohmann::json& j) {
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  SeirvParams p;
  p.beta = vec("beta");
  p.sigma = vec("sigma");
  p.gamma = vec("gamma");
  p.population = vec("population");
  p.horizon_days = j.value("horizon_days", 7);
  p.dt = j.value("dt", 1.0);
  p.validate();
  return p;
}

SeirvState SeirvState::susceptible(const Vec& population) {
  const auto k = population.size();
  return {population, Vec::Zero(k), Vec::Zero(k), Vec::Zero(k), Vec::Zero(k)};
}

double SeirvState::total() const { return S.sum() + E.sum() + I.sum() + R.sum() + V.sum(); }

void SeirvState::validate() const {
  const auto k = S.size();
  if (E.size() != k || I.size() != k || R.size() != k || V.size() != k) throw DimensionError("seirv state: ragged compartments");
  for (const Vec* c : {&S, &E, &I, &R, &V}) {
    if (!c->allFinite()) throw NumericError("seirv state: non-finite compartment");
    if ((c->array() < 0).any()) throw ConfigError("seirv state: negative compartment");
  }
}

nlohmann::json SeirvState::to_json() const {
  return {{"S", to_std(S)}, {"E", to_std(E)}, {"I", to_std(I)}, {"R", to_std(R)}, {"V", to_std(V)}};
}

SeirvState SeirvState::from_json(const nlohmann::json& j) {
  auto vec = [&](const char* key) {
    const auto v = j.at(key).get<std::vector<double>>();
    return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  SeirvState s{vec("S"), vec("E"), vec("I"), vec("R"), vec("V")};
  s.validate();
  return s;
}

OdTensor::OdTensor(int regions, int days) : OdTensor(regions, days, Vec::Zero(static_cast<Eigen::Index>(regions) * regions * days)) {}

OdTensor::OdTensor(int regions, int days, Vec flat) : regions_(regions), days_(days), flat_(std::move(flat)) {
  if (regions < 1 || days < 1) throw DimensionError("OD tensor needs regions >= 1 and days >= 1");
  if (flat_.size() != static_cast<Eigen::Index>(regions) * regions * days) {
    throw DimensionError("OD tensor: flat size " + std::to_string(flat_.size()) + " != K*K*days");
  }
}

OdTensor normalize_od(const OdTensor& od, const Vec& population) {
  if (population.size() != od.regions()) throw DimensionError("normalize_od: population length != regions");
  if ((population.array() <= 0).any()) throw ConfigError("normalize_od: populations must be > 0");
  if ((od.flat().array() < 0).any()) throw ConfigError("normalize_od: flows must be nonnegative");
  const auto rates = normalize_t<double>(to_std(od.flat()), od.regions(), od.days(), population);
  return OdTensor(od.regions(), od.days(), Eigen::Map<const Vec>(rates.data(), static_cast<Eigen::Index>(rates.size())));
}

SeirvState seirv_step(const SeirvState& state, const SeirvParams& params, const OdTensor& rates, int day,
                      const Vec& vaccines) {
  params.validate();
  state.validate();
  if (rates.regions() != params.regions() || vaccines.size() != params.regions()) {
    throw DimensionError("seirv_step: region count mismatch");
  }
  if (day < 0 || day >= rates.days()) throw DimensionError("seirv_step: day out of range");
  if ((vaccines.array() < 0).any()) throw ConfigError("seirv_step: vaccines must be >= 0");
  StateT<double> st = lift<double>(state);
  std::vector<double> per_day(static_cast<std::size_t>(params.regions()));
  for (int k = 0; k < params.regions(); ++k) per_day[k] = vaccines[k] / params.horizon_days;
  step_t(st, params, rates.flat().data() + rates.index(0, 0, day), per_day, static_cast<double*>(nullptr));
  return lower(st);
}

SeirvTrajectory simulate_seirv(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                               const SeirvState& init) {
  check_shapes(od, vaccines, params, init);
  const auto rates = normalize_t<double>(to_std(od.flat().cwiseMax(0.0)), od.regions(), od.days(), params.population);
  SeirvTrajectory traj;
  traj.states.push_back(init);
  traj.new_infections = simulate_t<double>(rates, od.days(), to_std(vaccines), params, init, &traj.states);
  return traj;
}

void write_trajectory_csv(std::ostream& os, const SeirvTrajectory& traj) {
  os << "step,region,S,E,I,R,V\n";
  os.precision(17);
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const auto& s = traj.states[n];
    for (int k = 0; k < s.regions(); ++k) {
      os << n << ',' << k << ',' << s.S[k] << ',' << s.E[k] << ',' << s.I[k] << ',' << s.R[k]
         << ',' << s.V[k] << '\n';
    }
  }
}

double total_new_infections(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                            const SeirvState& init, double budget) {
  check_shapes(od, vaccines, params, init);
  check_allocation(vaccines, budget);
  const auto rates = normalize_t<double>(to_std(od.flat().cwiseMax(0.0)), od.regions(), od.days(), params.population);
  return simulate_t<double>(rates, od.days(), to_std(vaccines), params, init, nullptr);
}

Vec grad_infections_a(const OdTensor& od, const Vec& vaccines, const SeirvParams& params, const SeirvState& init,
                      double budget) {
  check_shapes(od, vaccines, params, init);
  check_allocation(vaccines, budget);
  const int K = params.regions();
  std::vector<Dual> flows(static_cast<std::size_t>(od.flat().size()));
  for (Eigen::Index i = 0; i < od.flat().size(); ++i) flows[static_cast<std::size_t>(i)] = Dual(std::max(od.flat()[i], 0.0));
  const auto rates = normalize_t<Dual>(flows, K, od.days(), params.population);
  std::vector<Dual> a(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) a[k] = Dual(vaccines[k], Vec::Unit(K, k));
  const Dual total = simulate_t<Dual>(rates, od.days(), a, params, init, nullptr);
  return total.d.size() ? total.d : Vec::Zero(K);
}

InfectionGradients infection_gradients_reverse(const OdTensor& od, const Vec& vaccines, const SeirvParams& params,
                                               const SeirvState& init) {
  check_shapes(od, vaccines, params, init);
  const int K = params.regions();
  Tape tape;
  struct ActiveTape {
    Tape* previous;
    explicit ActiveTape(Tape* t) : previous(active_tape) { active_tape = t; }
    ~ActiveTape() { active_tape = previous; }
  } guard(&tape);
  std::vector<Var> flows(static_cast<std::size_t>(od.flat().size()));
  for (Eigen::Index i = 0; i < od.flat().size(); ++i) flows[static_cast<std::size_t>(i)] = Var::input(od.flat()[i]);
  std::vector<Var> a(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) a[k] = Var::input(vaccines[k]);
  const auto rates = normalize_t<Var>(flows, K, od.days(), params.population);
  const Var total = simulate_t<Var>(rates, od.days(), a, params, init, nullptr);

  std::vector<double> adj(tape.nodes.size(), 0.0);
  if (total.id >= 0) adj[static_cast<std::size_t>(total.id)] = 1.0;
  for (std::size_t n = tape.nodes.size(); n-- > 0;) {
    const double g = adj[n];
    if (g == 0.0) continue;
    const auto& node = tape.nodes[n];
    if (node.a >= 0) adj[static_cast<std::size_t>(node.a)] += g * node.da;
    if (node.b >= 0) adj[static_cast<std::size_t>(node.b)] += g * node.db;
  }
  InfectionGradients out;
  out.value = total.v;
  out.d_flows.resize(od.flat().size());
  for (Eigen::Index i = 0; i < od.flat().size(); ++i) {
    const int id = flows[static_cast<std::size_t>(i)].id;
    out.d_flows[i] = adj[static_cast<std::size_t>(id)];
  }
  out.d_vaccines.resize(K);
  for (int k = 0; k < K; ++k) out.d_vaccines[k] = adj[static_cast<std::size_t>(a[k].id)];
  return out;
}

// ---------------------------------------------------------------------------

SeirvObjective::SeirvObjective(SeirvParams params, SeirvState init, int od_days, double budget)
    : params_(std::move(params)),
      init_(std::move(init)),
      od_days_(od_days),
      budget_(budget),
      feasible_(FeasibleSet::simplex(params_.regions(), budget)) {
  params_.validate();
  init_.validate();
  if (init_.regions() != params_.regions()) throw DimensionError("SeirvObjective: state/params region mismatch");
  if (od_days < 1) throw ConfigError("SeirvObjective: od_days must be >= 1");
}

OdTensor SeirvObjective::to_od(const Vec& y) const { return OdTensor(params_.regions(), od_days_, y); }

double SeirvObjective::cost(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  return total_new_infections(to_od(y), a, params_, init_, budget_);
}

Vec SeirvObjective::grad_a(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  return grad_infections_a(to_od(y), a, params_, init_, budget_);
}

Vec SeirvObjective::grad_y(const Vec& y, const Vec& a) const {
  check_dims(y, a);
  check_allocation(a, budget_);
  return infection_gradients_reverse(to_od(y), a, params_, init_).d_flows;
}

nlohmann::json SeirvObjective::to_json() const {
  return {{"type", "vaccine"},
          {"params", params_.to_json()},
          {"initial_state", init_.to_json()},
          {"od_days", od_days_},
          {"budget", budget_}};
}

SeirvObjective SeirvObjective::from_json(const nlohmann::json& j) {
  try {
    return SeirvObjective(SeirvParams::from_json(j.at("params")), SeirvState::from_json(j.at("initial_state")),
                          j.at("od_days").get<int>(), j.at("budget").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("vaccine objective: ") + e.what());
  }
}

}  // namespace df2
