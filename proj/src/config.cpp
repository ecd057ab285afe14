#include "rcnf/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rcnf/dynamics.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {

using nlohmann::json;

namespace {

// Reads one object, rejecting unknown keys; every error names the dotted field path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where("") + ": expected an object");
  }
  ~Reader() = default;

  template <class T>
  void get(const char* key, T& out) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(where(key) + ": " + e.what());
    }
  }
  const json* child(const char* key) {
    seen_.push_back(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }
  std::string where(const std::string& key) const {
    if (path_.empty()) return key.empty() ? "<root>" : key;
    return key.empty() ? path_ : path_ + "." + key;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      bool known = false;
      for (const auto& s : seen_) known = known || s == it.key();
      if (!known) throw ValidationError(where(it.key()) + ": unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

json hyper_json(const RCHyper& h) {
  return {{"rho", h.rho}, {"k", h.k}, {"chi", h.chi}, {"alpha", h.alpha}, {"lambda", h.lambda}};
}

json to_json_value(const ExperimentConfig& c) {
  json init = json::object();
  if (c.sim.init.ranges.empty()) {
    init["fixed"] = c.sim.init.fixed;
  } else {
    json r = json::array();
    for (auto [lo, hi] : c.sim.init.ranges) r.push_back({lo, hi});
    init["ranges"] = r;
  }
  const auto& d = c.diagnostics;
  const auto& f = c.flow;
  return {
      {"seed", c.seed},
      {"scale", c.scale},
      {"system", {{"name", c.system}, {"params", c.params}}},
      {"sim",
       {{"dt_scheme", c.sim.dt_scheme}, {"dt_obs", c.sim.dt_obs}, {"n_obs", c.sim.n_obs}, {"n_traj", c.sim.n_traj},
        {"init", init}}},
      {"split", {{"train", c.split.train}, {"valid", c.split.valid}, {"test", c.split.test}, {"warm", c.split.warm}}},
      {"reservoir",
       {{"n_nodes", c.n_nodes},
        {"variant", variant_name(c.variant)},
        {"fixed_hyper", c.fixed_hyper ? hyper_json(*c.fixed_hyper) : json(nullptr)}}},
      {"bo",
       {{"n_init", c.bo.n_init}, {"n_iter", c.bo.n_iter}, {"n_candidates", c.bo.n_candidates},
        {"gp_starts", c.bo.gp_starts}}},
      {"flow",
       {{"n_layers", f.n_layers}, {"bins", f.spline.bins}, {"bound", f.spline.bound},
        {"min_width", f.spline.min_bin_width}, {"min_height", f.spline.min_bin_height},
        {"min_derivative", f.spline.min_derivative}, {"iterations", f.iterations},
        {"learning_rate", f.learning_rate}, {"beta1", f.beta1}, {"beta2", f.beta2}, {"epsilon", f.epsilon},
        {"batch_size", f.batch_size}}},
      {"standardize", c.standardize},
      {"forecast", {{"paths", c.forecast_paths}}},
      {"diagnostics",
       {{"bins", d.bins}, {"band_levels", d.band_levels}, {"transition", d.transition},
        {"transition_paths", d.transition_paths}, {"transition_t_lo", d.transition_t_lo},
        {"transition_t_hi", d.transition_t_hi}, {"mle", d.mle}, {"close_returns", d.close_returns},
        {"close_scale", d.close_scale}, {"correlation", d.correlation}, {"correlation_lag", d.correlation_lag},
        {"long_generation", d.long_generation}, {"long_warm", d.long_warm}, {"esn_contrast", d.esn_contrast},
        {"noiseless_mle", d.noiseless_mle}, {"noiseless_length", d.noiseless_length}}},
  };
}

ExperimentConfig from_json_value(const json& j) {
  ExperimentConfig c;
  Reader root(j, "");
  root.get("seed", c.seed);
  root.get("scale", c.scale);
  root.get("standardize", c.standardize);
  std::string written_hash;  // stamped by experiment runs; informational only
  root.get("config_hash", written_hash);
  if (const json* s = root.child("system")) {
    Reader r(*s, "system");
    r.get("name", c.system);
    r.get("params", c.params);
    r.finish();
  }
  if (const json* s = root.child("sim")) {
    Reader r(*s, "sim");
    r.get("dt_scheme", c.sim.dt_scheme);
    r.get("dt_obs", c.sim.dt_obs);
    r.get("n_obs", c.sim.n_obs);
    r.get("n_traj", c.sim.n_traj);
    if (const json* i = r.child("init")) {
      Reader ri(*i, "sim.init");
      ri.get("fixed", c.sim.init.fixed);
      std::vector<std::vector<double>> ranges;
      ri.get("ranges", ranges);
      for (std::size_t k = 0; k < ranges.size(); ++k) {
        if (ranges[k].size() != 2) throw ValidationError("sim.init.ranges[" + std::to_string(k) + "]: expected [lo, hi]");
        c.sim.init.ranges.emplace_back(ranges[k][0], ranges[k][1]);
      }
      ri.finish();
    }
    r.finish();
  }
  if (const json* s = root.child("split")) {
    Reader r(*s, "split");
    r.get("train", c.split.train);
    r.get("valid", c.split.valid);
    r.get("test", c.split.test);
    r.get("warm", c.split.warm);
    r.finish();
  }
  if (const json* s = root.child("reservoir")) {
    Reader r(*s, "reservoir");
    r.get("n_nodes", c.n_nodes);
    std::string v = variant_name(c.variant);
    r.get("variant", v);
    try {
      c.variant = parse_variant(v);
    } catch (const ValidationError& e) {
      throw ValidationError(std::string("reservoir.variant: ") + e.what());
    }
    if (const json* h = r.child("fixed_hyper")) {
      RCHyper hp;
      Reader rh(*h, "reservoir.fixed_hyper");
      rh.get("rho", hp.rho);
      rh.get("k", hp.k);
      rh.get("chi", hp.chi);
      rh.get("alpha", hp.alpha);
      rh.get("lambda", hp.lambda);
      rh.finish();
      c.fixed_hyper = hp;
    }
    r.finish();
  }
  if (const json* s = root.child("bo")) {
    Reader r(*s, "bo");
    r.get("n_init", c.bo.n_init);
    r.get("n_iter", c.bo.n_iter);
    r.get("n_candidates", c.bo.n_candidates);
    r.get("gp_starts", c.bo.gp_starts);
    r.finish();
  }
  if (const json* s = root.child("flow")) {
    Reader r(*s, "flow");
    auto& f = c.flow;
    r.get("n_layers", f.n_layers);
    r.get("bins", f.spline.bins);
    r.get("bound", f.spline.bound);
    r.get("min_width", f.spline.min_bin_width);
    r.get("min_height", f.spline.min_bin_height);
    r.get("min_derivative", f.spline.min_derivative);
    r.get("iterations", f.iterations);
    r.get("learning_rate", f.learning_rate);
    r.get("beta1", f.beta1);
    r.get("beta2", f.beta2);
    r.get("epsilon", f.epsilon);
    r.get("batch_size", f.batch_size);
    r.finish();
  }
  if (const json* s = root.child("forecast")) {
    Reader r(*s, "forecast");
    r.get("paths", c.forecast_paths);
    r.finish();
  }
  if (const json* s = root.child("diagnostics")) {
    Reader r(*s, "diagnostics");
    auto& d = c.diagnostics;
    r.get("bins", d.bins);
    r.get("band_levels", d.band_levels);
    r.get("transition", d.transition);
    r.get("transition_paths", d.transition_paths);
    r.get("transition_t_lo", d.transition_t_lo);
    r.get("transition_t_hi", d.transition_t_hi);
    r.get("mle", d.mle);
    r.get("close_returns", d.close_returns);
    r.get("close_scale", d.close_scale);
    r.get("correlation", d.correlation);
    r.get("correlation_lag", d.correlation_lag);
    r.get("long_generation", d.long_generation);
    r.get("long_warm", d.long_warm);
    r.get("esn_contrast", d.esn_contrast);
    r.get("noiseless_mle", d.noiseless_mle);
    r.get("noiseless_length", d.noiseless_length);
    r.finish();
  }
  root.finish();
  return c;
}

template <class F>
void prefixed(const std::string& prefix, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + ": " + e.what());
  }
}

}  // namespace

SystemSpec ExperimentConfig::system_spec() const {
  SystemSpec s;
  prefixed("system", [&] { s = builtin_system(system, params); });
  return s;
}

void ExperimentConfig::validate() const {
  const SystemSpec spec = system_spec();
  prefixed("sim", [&] { sim.validate(spec); });
  prefixed("split", [&] { split.validate(sim.n_obs); });
  if (split.train + split.valid + split.test != sim.n_obs)
    throw ValidationError("split: train + valid + test must equal sim.n_obs");
  if (split.warm == 0 || split.warm > split.valid)
    throw ValidationError("split.warm: must lie in [1, valid] so test warm-ups come from the validation tail");
  if (n_nodes == 0 || n_nodes > 20000) throw ValidationError("reservoir.n_nodes: must lie in [1, 20000]");
  if (fixed_hyper) prefixed("reservoir.fixed_hyper", [&] { fixed_hyper->validate_ranges(); });
  if (!fixed_hyper && (bo.n_init < 2 || bo.n_candidates == 0))
    throw ValidationError("bo: n_init must be >= 2 and n_candidates > 0");
  if (flow.n_layers == 0 || flow.n_layers > 4) throw ValidationError("flow.n_layers: must lie in [1, 4]");
  if (flow.iterations == 0) throw ValidationError("flow.iterations: must be positive");
  if (!(flow.learning_rate > 0.0)) throw ValidationError("flow.learning_rate: must be positive");
  if (flow.spline.bins < 2 || !(flow.spline.bound > 0.0)) throw ValidationError("flow: bins >= 2 and bound > 0");
  if (forecast_paths > sim.n_traj) throw ValidationError("forecast.paths: exceeds sim.n_traj");
  if (diagnostics.bins == 0) throw ValidationError("diagnostics.bins: must be positive");
  for (double l : diagnostics.band_levels)
    if (!(l > 0.0 && l < 1.0)) throw ValidationError("diagnostics.band_levels: levels must lie in (0, 1)");
  if (diagnostics.transition && spec.dim != 1) throw ValidationError("diagnostics.transition: needs a 1-d system");
  if (!(diagnostics.transition_t_hi > diagnostics.transition_t_lo))
    throw ValidationError("diagnostics.transition_t_hi: must exceed transition_t_lo");
}

RCNFTrainConfig ExperimentConfig::train_config() const {
  RCNFTrainConfig t;
  t.n_nodes = n_nodes;
  t.warm = split.warm;
  t.variant = variant;
  t.fixed_hyper = fixed_hyper;
  t.bo = bo;
  t.flow = flow;
  t.standardize = standardize;
  t.seed = seed;
  return t;
}

std::string config_to_json(const ExperimentConfig& c) { return to_json_value(c).dump(2); }

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json_value(j);
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

ExperimentConfig apply_overrides(const ExperimentConfig& c, const std::vector<std::string>& overrides) {
  json j = to_json_value(c);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + o + "': expected key.path=value");
    const std::string path = o.substr(0, eq), text = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(text);
    } catch (const json::parse_error&) {
      value = text;
    }
    json* node = &j;
    std::size_t start = 0;
    while (true) {
      const auto dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (key.empty()) throw ValidationError("override '" + o + "': empty path component");
      if (dot == std::string::npos) {
        (*node)[key] = value;
        break;
      }
      json& next = (*node)[key];
      if (next.is_null()) next = json::object();
      if (!next.is_object()) throw ValidationError("override '" + o + "': " + path.substr(0, dot) + " is not an object");
      node = &next;
      start = dot + 1;
    }
  }
  return from_json_value(j);
}

std::string config_hash(const ExperimentConfig& c) {
  const std::string s = to_json_value(c).dump();  // object keys are sorted
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace rcnf

namespace rcnf {

std::vector<std::string> preset_names() {
  return {"ou", "double_well", "van_der_pol", "mmo", "linear_sdde", "enso", "lorenz"};
}

ExperimentConfig preset(const std::string& name, const std::string& scale) {
  if (scale != "desk" && scale != "paper") throw ValidationError("scale must be desk or paper, got '" + scale + "'");
  const bool paper = scale == "paper";
  ExperimentConfig c;
  c.system = name;
  c.scale = scale;
  c.seed = 20240601;
  c.sim.dt_scheme = c.sim.dt_obs = 0.01;
  c.sim.n_obs = 4000;
  c.split = {2000, 100, 1900, 100};
  c.n_nodes = 500;
  c.bo.n_init = 10;
  c.bo.n_iter = 50;
  c.flow.iterations = 500;
  c.flow.learning_rate = 0.005;
  if (!paper && builtin_system(name).dim > 1) c.flow.batch_size = 8192;

  if (name == "ou") {
    c.sim.n_traj = paper ? 1000 : 500;
    if (!paper) {
      c.sim.n_obs = 2000;
      c.split = {1000, 100, 900, 100};
      c.bo.n_iter = 15;
    }
  } else if (name == "double_well") {
    c.sim.n_traj = paper ? 2000 : 500;
    if (!paper) c.fixed_hyper = RCHyper{0.8609, 3, 1.3469, 0.9839, 5.7206e-2};
    c.diagnostics.transition = true;
    c.diagnostics.transition_paths = 10000;
  } else if (name == "van_der_pol") {
    c.sim.n_traj = paper ? 1000 : 200;
    c.n_nodes = paper ? 1000 : 500;
    if (!paper) c.fixed_hyper = RCHyper{0.5192, 3, 1.2345, 0.6074, 1.8232e-2};
  } else if (name == "mmo") {
    c.sim.n_traj = paper ? 1000 : 200;
    c.n_nodes = paper ? 1000 : 500;
    if (!paper) c.fixed_hyper = RCHyper{0.8609, 3, 1.3469, 0.9839, 5.7206e-2};
  } else if (name == "linear_sdde") {
    c.sim.n_traj = paper ? 2000 : 500;
    c.sim.n_obs = 2000;
    c.split = {1000, 100, 900, 100};
    if (!paper) c.fixed_hyper = RCHyper{0.9324, 4, 0.3655, 0.2008, 2.2073e-6};
    c.diagnostics.esn_contrast = true;
  } else if (name == "enso") {
    c.sim.n_traj = paper ? 2000 : 300;
    if (!paper) c.fixed_hyper = RCHyper{0.8654, 1, 0.6024, 0.05, 5.0616e-5};
  } else if (name == "lorenz") {
    c.sim.dt_scheme = 1e-5;
    c.sim.n_traj = paper ? 1000 : 100;
    c.n_nodes = 1000;
    c.standardize = true;
    if (!paper) c.fixed_hyper = RCHyper{0.3972, 5, 0.3817, 0.9694, 7.7623e-2};
    c.diagnostics.mle = true;
    c.diagnostics.close_returns = true;
    c.diagnostics.correlation = true;
    c.diagnostics.long_generation = paper ? 1000000 : 100000;
    c.diagnostics.long_warm = 500;
    c.diagnostics.noiseless_mle = true;
    c.diagnostics.noiseless_length = 20000;
  } else {
    throw ValidationError("unknown preset '" + name + "'");
  }
  c.sim.init = default_initial_condition(c.system_spec());
  return c;
}

}  // namespace rcnf
