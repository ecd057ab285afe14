#include "rcnf/dynamics.hpp"

#include <cmath>
#include <sstream>

#include "rcnf/errors.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {
namespace {

struct Preset {
  SystemKind kind;
  std::size_t dim;
  std::map<std::string, double> params;
  std::vector<double> g;
  double delay;
  HistoryKind history;
  double slope, offset;
};

Preset preset(const std::string& name) {
  if (name == "ou") return {SystemKind::kOu, 1, {{"b0", 0.15}, {"mu0", 1.0}}, {1.0}, 0, HistoryKind::kNone, 0, 0};
  if (name == "double_well") return {SystemKind::kDoubleWell, 1, {}, {0.5}, 0, HistoryKind::kNone, 0, 0};
  if (name == "van_der_pol")
    return {SystemKind::kVanDerPol, 2, {{"mu0", 8.0}}, {0.1, 0.1}, 0, HistoryKind::kNone, 0, 0};
  if (name == "mmo")
    return {SystemKind::kMmo, 2, {{"eps_inv", 10.0}, {"a0", 0.988}}, {0.005, 0.005}, 0, HistoryKind::kNone, 0, 0};
  if (name == "linear_sdde")
    return {SystemKind::kLinearSdde, 1, {{"mu0", -1.2}}, {1.0}, 1.0, HistoryKind::kAffine, 1.0, 1.0};
  if (name == "enso")
    return {SystemKind::kEnso, 1, {{"alpha0", 0.75}}, {0.1}, 6.0, HistoryKind::kConstantInitial, 0, 0};
  if (name == "lorenz")
    return {SystemKind::kLorenz, 3, {{"sigma0", 10.0}, {"rho0", 28.0}, {"beta0", 8.0 / 3.0}}, {3.0, 3.0, 3.0},
            0, HistoryKind::kNone, 0, 0};
  throw ValidationError("unknown system: " + name);
}

}  // namespace

std::vector<std::string> builtin_system_names() {
  return {"ou", "double_well", "van_der_pol", "mmo", "linear_sdde", "enso", "lorenz"};
}

SystemSpec builtin_system(const std::string& name, const std::map<std::string, double>& overrides) {
  Preset p = preset(name);
  SystemSpec s;
  s.name = name;
  s.kind = p.kind;
  s.dim = p.dim;
  s.params = p.params;
  s.diffusion = p.g;
  s.delay = p.delay;
  s.history = p.history;
  s.history_slope = p.slope;
  s.history_offset = p.offset;
  for (const auto& [key, value] : overrides) {
    if (auto it = s.params.find(key); it != s.params.end()) {
      it->second = value;
    } else if (key == "g") {
      for (auto& g : s.diffusion) g = value;
    } else if (key.size() == 2 && key[0] == 'g' && key[1] >= '1' && key[1] < static_cast<char>('1' + s.dim)) {
      s.diffusion[static_cast<std::size_t>(key[1] - '1')] = value;
    } else if (key == "tau0" && s.delay > 0) {
      s.delay = value;
    } else {
      throw ValidationError("system '" + name + "' has no parameter '" + key + "'");
    }
  }
  s.validate();
  return s;
}

double SystemSpec::param(const std::string& key) const {
  auto it = params.find(key);
  if (it == params.end()) throw ValidationError("system '" + name + "' has no parameter '" + key + "'");
  return it->second;
}

void SystemSpec::validate() const {
  if (dim == 0) throw ValidationError("system dimension must be positive");
  if (diffusion.size() != dim) throw ValidationError("diffusion diagonal must have dim entries");
  // g = 0 is allowed so the deterministic limits can be simulated.
  for (double g : diffusion)
    if (!(g >= 0.0) || !std::isfinite(g)) throw ValidationError("diffusion entries must be finite and >= 0");
  if (!(delay >= 0.0)) throw ValidationError("delay must be >= 0");
  if (delay > 0 && history == HistoryKind::kNone) throw ValidationError("delay system requires a history");
}

double SystemSpec::history_value(double s, const double* x0, std::size_t i) const {
  switch (history) {
    case HistoryKind::kConstantInitial: return x0[i];
    case HistoryKind::kAffine: return history_slope * s + history_offset;
    case HistoryKind::kNone: break;
  }
  return x0[i];
}

void SystemSpec::drift(const double* x, const double* xd, double* out) const {
  switch (kind) {
    case SystemKind::kOu: {
      out[0] = params.at("b0") * (params.at("mu0") - x[0]);
      return;
    }
    case SystemKind::kDoubleWell: out[0] = x[0] - x[0] * x[0] * x[0]; return;
    case SystemKind::kVanDerPol: {
      const double mu = params.at("mu0");
      out[0] = mu * (x[0] - x[0] * x[0] * x[0] / 3.0 - x[1]);
      out[1] = x[0] / mu;
      return;
    }
    case SystemKind::kMmo: {
      out[0] = params.at("eps_inv") * (x[0] - x[0] * x[0] * x[0] / 3.0 - x[1]);
      out[1] = x[0] + params.at("a0");
      return;
    }
    case SystemKind::kLinearSdde: out[0] = params.at("mu0") * xd[0]; return;
    case SystemKind::kEnso: out[0] = x[0] - x[0] * x[0] * x[0] - params.at("alpha0") * xd[0]; return;
    case SystemKind::kLorenz: {
      out[0] = params.at("sigma0") * (x[1] - x[0]);
      out[1] = x[0] * (params.at("rho0") - x[2]) - x[1];
      out[2] = x[0] * x[1] - params.at("beta0") * x[2];
      return;
    }
  }
}

namespace {

// Integer ratio a / b if it is one to within rounding, else 0.
std::size_t integer_ratio(double a, double b) {
  const double r = a / b;
  const double n = std::round(r);
  if (n < 1 || std::abs(r - n) > 1e-9 * n) return 0;
  return static_cast<std::size_t>(n);
}

// Drift with parameters pulled out of the map once per trajectory.
struct FastDrift {
  SystemKind kind;
  double p0 = 0, p1 = 0, p2 = 0;

  explicit FastDrift(const SystemSpec& s) : kind(s.kind) {
    switch (kind) {
      case SystemKind::kOu: p0 = s.param("b0"); p1 = s.param("mu0"); break;
      case SystemKind::kVanDerPol: p0 = s.param("mu0"); break;
      case SystemKind::kMmo: p0 = s.param("eps_inv"); p1 = s.param("a0"); break;
      case SystemKind::kLinearSdde: p0 = s.param("mu0"); break;
      case SystemKind::kEnso: p0 = s.param("alpha0"); break;
      case SystemKind::kLorenz: p0 = s.param("sigma0"); p1 = s.param("rho0"); p2 = s.param("beta0"); break;
      case SystemKind::kDoubleWell: break;
    }
  }

  void operator()(const double* x, const double* xd, double* out) const {
    switch (kind) {
      case SystemKind::kOu: out[0] = p0 * (p1 - x[0]); return;
      case SystemKind::kDoubleWell: out[0] = x[0] - x[0] * x[0] * x[0]; return;
      case SystemKind::kVanDerPol:
        out[0] = p0 * (x[0] - x[0] * x[0] * x[0] / 3.0 - x[1]);
        out[1] = x[0] / p0;
        return;
      case SystemKind::kMmo:
        out[0] = p0 * (x[0] - x[0] * x[0] * x[0] / 3.0 - x[1]);
        out[1] = x[0] + p1;
        return;
      case SystemKind::kLinearSdde: out[0] = p0 * xd[0]; return;
      case SystemKind::kEnso: out[0] = x[0] - x[0] * x[0] * x[0] - p0 * xd[0]; return;
      case SystemKind::kLorenz:
        out[0] = p0 * (x[1] - x[0]);
        out[1] = x[0] * (p1 - x[2]) - x[1];
        out[2] = x[0] * x[1] - p2 * x[2];
        return;
    }
  }
};

}  // namespace

std::size_t SimConfig::stride() const {
  if (!(dt_scheme > 0) || !(dt_obs > 0)) throw ValidationError("time steps must be positive");
  const std::size_t k = integer_ratio(dt_obs, dt_scheme);
  if (k == 0) throw ValidationError("dt_obs must be a positive integer multiple of dt_scheme");
  return k;
}

void SimConfig::validate(const SystemSpec& spec) const {
  spec.validate();
  stride();
  if (n_obs == 0 || n_traj == 0) throw ValidationError("n_obs and n_traj must be positive");
  if (spec.delay > 0 && integer_ratio(spec.delay, dt_scheme) == 0)
    throw ValidationError("delay must be a positive integer multiple of dt_scheme");
  if (init.ranges.empty()) {
    if (init.fixed.size() != spec.dim) throw ValidationError("initial condition must have dim entries");
  } else {
    if (init.ranges.size() != spec.dim) throw ValidationError("initial ranges must have dim entries");
    for (const auto& [lo, hi] : init.ranges)
      if (!(lo <= hi)) throw ValidationError("initial range lower bound exceeds upper bound");
  }
}

InitialCondition default_initial_condition(const SystemSpec& spec) {
  switch (spec.kind) {
    case SystemKind::kOu: return {{0.0}, {}};
    case SystemKind::kDoubleWell: return {{}, {{-1.5, 1.5}}};
    case SystemKind::kVanDerPol:
    case SystemKind::kMmo: return {{0.5, 0.0}, {}};
    case SystemKind::kLinearSdde: return {{1.0}, {}};
    case SystemKind::kEnso: return {{}, {{-1.0, 1.0}}};
    case SystemKind::kLorenz: return {{0.0, 1.0, 0.0}, {}};
  }
  return {};
}

void em_step(const SystemSpec& spec, const double* state, const double* delayed, double dt,
             const double* noise, double* out) {
  double f[8];
  if (spec.dim > 8) throw ValidationError("em_step supports dim <= 8");
  spec.drift(state, delayed, f);
  for (std::size_t i = 0; i < spec.dim; ++i) {
    out[i] = state[i] + f[i] * dt + spec.diffusion[i] * noise[i];
    if (!std::isfinite(out[i]) || std::abs(out[i]) > kBlowUpThreshold)
      throw NumericalError("Euler-Maruyama step produced a non-finite or blown-up state");
  }
}

std::vector<double> em_step(const SystemSpec& spec, const std::vector<double>& state,
                            const std::optional<std::vector<double>>& delayed, double dt,
                            const std::vector<double>& noise) {
  if (state.size() != spec.dim || noise.size() != spec.dim) throw ValidationError("em_step: dimension mismatch");
  if ((spec.delay > 0) != delayed.has_value())
    throw ValidationError("em_step: delayed state must be given iff the system has a delay");
  if (delayed && delayed->size() != spec.dim) throw ValidationError("em_step: delayed state dimension mismatch");
  std::vector<double> out(spec.dim);
  em_step(spec, state.data(), delayed ? delayed->data() : nullptr, dt, noise.data(), out.data());
  return out;
}

Ensemble simulate_ensemble(const SystemSpec& spec, const SimConfig& cfg) {
  cfg.validate(spec);
  const std::size_t d = spec.dim;
  const std::size_t stride = cfg.stride();
  const std::size_t lag = spec.delay > 0 ? integer_ratio(spec.delay, cfg.dt_scheme) : 0;
  const double dt = cfg.dt_scheme;
  const double sqdt = std::sqrt(dt);
  const FastDrift drift(spec);

  Ensemble e(cfg.n_traj, cfg.n_obs, d, cfg.dt_obs, 0.0);
  e.meta.system = spec.name;
  e.meta.seed = cfg.seed;

  parallel_for(cfg.n_traj, [&](std::size_t m) {
    Engine eng = make_engine(derive_seed(cfg.seed, m));
    std::vector<double> x(d), next(d), dB(d), f(d);
    if (cfg.init.ranges.empty()) {
      x = cfg.init.fixed;
    } else {
      for (std::size_t i = 0; i < d; ++i) {
        std::uniform_real_distribution<double> u(cfg.init.ranges[i].first, cfg.init.ranges[i].second);
        x[i] = u(eng);
      }
    }
    // Ring buffer of the last `lag` scheme states; head holds X_{n - lag}.
    std::vector<double> ring(lag * d);
    std::size_t head = 0;
    for (std::size_t j = 0; j < lag; ++j)
      for (std::size_t i = 0; i < d; ++i)
        ring[j * d + i] = spec.history_value(-static_cast<double>(lag - j) * dt, x.data(), i);

    std::normal_distribution<double> n01(0.0, 1.0);
    std::copy(x.begin(), x.end(), e.state(m, 0));
    std::size_t n = 0;
    for (std::size_t t = 1; t < cfg.n_obs; ++t) {
      for (std::size_t s = 0; s < stride; ++s, ++n) {
        const double* xd = lag ? ring.data() + head * d : nullptr;
        drift(x.data(), xd, f.data());
        for (std::size_t i = 0; i < d; ++i) {
          const double step = spec.diffusion[i] * sqdt * n01(eng);
          next[i] = x[i] + f[i] * dt + step;
          if (!std::isfinite(next[i]) || std::abs(next[i]) > kBlowUpThreshold) {
            std::ostringstream msg;
            msg << "trajectory " << m << " blew up at scheme step " << n + 1;
            throw DivergenceError(m, n + 1, msg.str());
          }
        }
        if (lag) {
          std::copy(x.begin(), x.end(), ring.begin() + static_cast<std::ptrdiff_t>(head * d));
          head = (head + 1) % lag;
        }
        x.swap(next);
      }
      std::copy(x.begin(), x.end(), e.state(m, t));
    }
  });
  return e;
}

MeanVar ou_closed_form(double b0, double mu0, double g, double x0, double t) {
  if (!(b0 > 0)) throw ValidationError("b0 must be positive");
  if (!(t >= 0)) throw ValidationError("t must be non-negative");
  const double decay = std::exp(-b0 * t);
  return {mu0 + (x0 - mu0) * decay, g * g * (1.0 - std::exp(-2.0 * b0 * t)) / (2.0 * b0)};
}

MeanVar linear_sdde_closed_form(double t) {
  if (!(t >= 0.0 && t <= 2.0)) throw ValidationError("linear SDDE closed form is defined on [0, 2]");
  if (t <= 1.0) return {1.0 - 0.6 * t * t, t};
  // X_t = X_1 - 1.2 int_1^t X_{s-1} ds + (B_t - B_1) with X_{s-1} from the first interval.
  const double u = t - 1.0;
  const double mean = 0.4 - 1.2 * u + 0.24 * u * u * u;
  const double var = 1.0 + u - 1.2 * u * u + 0.48 * u * u * u;
  return {mean, var};
}

}  // namespace rcnf
