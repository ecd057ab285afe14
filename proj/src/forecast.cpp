#include "rcnf/forecast.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rcnf/binary_io.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {

void RCNFModel::save(const std::string& path) const {
  std::ostringstream res, flw;
  reservoir.save(res);
  flow.save(flw);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path);
  io::write_magic(os, "RCNF");
  io::write_u32(os, 1);
  io::write_u64(os, warm);
  io::write_u32(os, data_scaler ? 1u : 0u);
  if (data_scaler) {
    io::write_u64(os, data_scaler->dim());
    io::write_f64s(os, data_scaler->mean.data(), data_scaler->dim());
    io::write_f64s(os, data_scaler->std.data(), data_scaler->dim());
  }
  io::write_bytes(os, res.str());
  io::write_bytes(os, flw.str());
  io::write_bytes(os, provenance);
  os.close();
  if (!os) throw IoError("write failed: " + path);
}

RCNFModel RCNFModel::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  io::expect_magic(is, "RCNF", path);
  const std::uint32_t version = io::read_u32(is);
  if (version != 1) throw IoError(path + ": unsupported RCNF version " + std::to_string(version));
  RCNFModel m;
  m.warm = io::read_u64(is);
  if (io::read_u32(is) == 1) {
    const std::size_t d = io::read_u64(is);
    if (d == 0 || d > 64) throw IoError(path + ": implausible scaler dimension");
    Scaler s{std::vector<double>(d), std::vector<double>(d)};
    io::read_f64s(is, s.mean.data(), d);
    io::read_f64s(is, s.std.data(), d);
    m.data_scaler = std::move(s);
  }
  std::istringstream res(io::read_bytes(is)), flw(io::read_bytes(is));
  m.reservoir = ReservoirModel::load(res);
  m.flow = FlowModel::load(flw);
  m.provenance = io::read_bytes(is);
  if (m.reservoir.dim() != m.flow.dim()) throw IoError(path + ": reservoir and flow dimensions differ");
  return m;
}

RCNFTrainResult train_rcnf(const EnsembleView& train_in, const EnsembleView& valid_in, const RCNFTrainConfig& cfg) {
  if (train_in.dim != valid_in.dim || train_in.n_traj != valid_in.n_traj)
    throw ValidationError("training and validation segments have different shapes");
  if (cfg.warm == 0 || cfg.warm + 1 >= train_in.length) throw ValidationError("warm-up must satisfy 0 < warm < T - 1");

  std::optional<Scaler> scaler;
  Ensemble train_s, valid_s;
  EnsembleView train = train_in, valid = valid_in;
  if (cfg.standardize) {
    scaler = fit_scaler(train_in);
    train_s = apply_scaler(train_in, *scaler);
    valid_s = apply_scaler(valid_in, *scaler);
    train = train_s.view();
    valid = valid_s.view();
  }

  const std::uint64_t reservoir_seed = derive_seed(cfg.seed, "reservoir");
  RCNFTrainResult out;
  RCHyper hyper;
  if (cfg.fixed_hyper) {
    hyper = *cfg.fixed_hyper;
  } else {
    BOConfig bo = cfg.bo;
    bo.seed = derive_seed(cfg.seed, "bo");
    out.search = bo_search(make_rc_objective(train, valid, cfg.warm, cfg.n_nodes, reservoir_seed, cfg.variant), bo);
    hyper = out.search->best;
  }

  ReservoirModel res = build_reservoir(hyper, cfg.n_nodes, train.dim, reservoir_seed, cfg.variant);
  out.readout = fit_readout(res, train, cfg.warm);
  out.errors = collect_errors(res, train, cfg.warm);

  FlowTrainConfig fc = cfg.flow;
  fc.seed = derive_seed(cfg.seed, "flow");
  FlowTrainResult fr = train_flow(out.errors, fc);
  out.flow_loss = std::move(fr.loss_trace);

  nlohmann::json prov = {{"seed", cfg.seed},
                         {"n_nodes", cfg.n_nodes},
                         {"warm", cfg.warm},
                         {"variant", variant_name(cfg.variant)},
                         {"hyper",
                          {{"rho", hyper.rho}, {"k", hyper.k}, {"chi", hyper.chi}, {"alpha", hyper.alpha},
                           {"lambda", hyper.lambda}}},
                         {"searched", !cfg.fixed_hyper.has_value()},
                         {"readout_residual", out.readout.relative_residual},
                         {"flow_final_nll", out.flow_loss.empty() ? 0.0 : out.flow_loss.back()}};
  out.model.reservoir = std::move(res);
  out.model.flow = std::move(fr.model);
  out.model.warm = cfg.warm;
  out.model.data_scaler = scaler;
  out.model.provenance = prov.dump();
  return out;
}

namespace {

constexpr double kLimit = 1e12;

// Rolls one path in model (possibly standardised) coordinates. Returns the step index
// of a blow-up, or horizon if the path stayed finite.
std::size_t roll(const RCNFModel& model, const std::vector<double>& warm_states, std::size_t n_warm,
                 std::size_t horizon, Engine& eng, NoiseMode noise, double* out) {
  const ReservoirModel& res = model.reservoir;
  const std::size_t n = res.n_nodes(), d = res.dim();
  std::vector<double> r(n, 0.0), scratch(n), x(d), pred(d), u(d), eps(d);
  for (std::size_t t = 0; t < n_warm; ++t) res.advance(r.data(), warm_states.data() + t * d, scratch.data());
  std::copy(warm_states.end() - static_cast<std::ptrdiff_t>(d), warm_states.end(), x.begin());
  std::normal_distribution<double> n01(0.0, 1.0);
  for (std::size_t s = 0; s < horizon; ++s) {
    res.readout(x.data(), r.data(), pred.data());
    if (noise == NoiseMode::kFlow) {
      for (std::size_t i = 0; i < d; ++i) u[i] = n01(eng);
      model.flow.sample_from_base(u.data(), eps.data());
      for (std::size_t i = 0; i < d; ++i) pred[i] += eps[i];
    }
    for (std::size_t i = 0; i < d; ++i)
      if (!std::isfinite(pred[i]) || std::abs(pred[i]) > kLimit) return s;
    std::copy(pred.begin(), pred.end(), out + s * d);
    x = pred;  // the corrected state is the next input
    if (s + 1 < horizon) res.advance(r.data(), x.data(), scratch.data());
  }
  return horizon;
}

}  // namespace

ForecastResult forecast_ensemble(const RCNFModel& model, const EnsembleView& warmups, std::size_t horizon,
                                 std::uint64_t seed, NoiseMode noise) {
  const std::size_t d = model.reservoir.dim();
  if (warmups.dim != d) throw ValidationError("warm-up dimension does not match the model");
  if (warmups.length == 0) throw ValidationError("warm-up must contain at least one state");
  const std::size_t m_all = warmups.n_traj;
  std::vector<double> buf(m_all * horizon * d, 0.0);
  std::vector<std::size_t> fail(m_all, horizon);

  parallel_for(m_all, [&](std::size_t m) {
    std::vector<double> w(warmups.length * d);
    for (std::size_t t = 0; t < warmups.length; ++t) {
      std::copy(warmups.state(m, t), warmups.state(m, t) + d, w.begin() + static_cast<std::ptrdiff_t>(t * d));
      if (model.data_scaler) model.data_scaler->apply_inplace(w.data() + t * d);
    }
    Engine eng = make_engine(derive_seed(seed, m));
    double* out = buf.data() + m * horizon * d;
    fail[m] = roll(model, w, warmups.length, horizon, eng, noise, out);
    if (model.data_scaler)
      for (std::size_t s = 0; s < horizon; ++s) model.data_scaler->invert_inplace(out + s * d);
  });

  ForecastResult res;
  for (std::size_t m = 0; m < m_all; ++m) {
    if (fail[m] < horizon) {
      res.diverged.push_back(m);
      res.diverged_step.push_back(fail[m]);
    } else {
      res.path_index.push_back(m);
    }
  }
  std::vector<double> kept;
  if (res.diverged.empty()) {
    kept = std::move(buf);
  } else {
    kept.reserve(res.path_index.size() * horizon * d);
    for (std::size_t m : res.path_index)
      kept.insert(kept.end(), buf.begin() + static_cast<std::ptrdiff_t>(m * horizon * d),
                  buf.begin() + static_cast<std::ptrdiff_t>((m + 1) * horizon * d));
  }
  res.paths = Ensemble(res.path_index.size(), horizon, d, warmups.dt_obs,
                       warmups.t0 + static_cast<double>(warmups.length) * warmups.dt_obs, std::move(kept));
  return res;
}

Eigen::MatrixXd generate(const RCNFModel& model, const Eigen::MatrixXd& warmup, std::size_t n, std::uint64_t seed,
                         NoiseMode noise) {
  const std::size_t d = model.reservoir.dim();
  if (warmup.cols() != static_cast<Eigen::Index>(d)) throw ValidationError("warm-up dimension does not match the model");
  if (warmup.rows() < static_cast<Eigen::Index>(std::max<std::size_t>(1, model.warm)))
    throw ValidationError("warm-up shorter than the model's warm-up length");
  std::vector<double> w(static_cast<std::size_t>(warmup.rows()) * d);
  for (Eigen::Index t = 0; t < warmup.rows(); ++t) {
    for (std::size_t i = 0; i < d; ++i) w[static_cast<std::size_t>(t) * d + i] = warmup(t, static_cast<Eigen::Index>(i));
    if (model.data_scaler) model.data_scaler->apply_inplace(w.data() + static_cast<std::size_t>(t) * d);
  }
  std::vector<double> buf(n * d);
  Engine eng = make_engine(derive_seed(seed, std::uint64_t{0}));
  const std::size_t fail = roll(model, w, static_cast<std::size_t>(warmup.rows()), n, eng, noise, buf.data());
  if (fail < n) throw DivergenceError(0, fail, "generated trajectory diverged at step " + std::to_string(fail));
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < n; ++s) {
    if (model.data_scaler) model.data_scaler->invert_inplace(buf.data() + s * d);
    for (std::size_t i = 0; i < d; ++i) out(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(i)) = buf[s * d + i];
  }
  return out;
}

}  // namespace rcnf
