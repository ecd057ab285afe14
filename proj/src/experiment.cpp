#include "rcnf/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/parallel.hpp"
#include "rcnf/rng.hpp"

namespace rcnf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void say(const Logger& log, const std::string& s) {
  if (log) log(s);
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

struct Moments {
  std::vector<double> mean, std;
};

Moments snapshot_moments(const EnsembleView& e, std::size_t t) {
  Moments m{std::vector<double>(e.dim, 0.0), std::vector<double>(e.dim, 0.0)};
  for (std::size_t i = 0; i < e.dim; ++i) {
    const std::vector<double> s = e.snapshot(t, i);
    const double mu = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
    double ss = 0.0;
    for (double v : s) ss += (v - mu) * (v - mu);
    m.mean[i] = mu;
    m.std[i] = s.size() > 1 ? std::sqrt(ss / static_cast<double>(s.size() - 1)) : 0.0;
  }
  return m;
}

Eigen::MatrixXd trajectory(const EnsembleView& e, std::size_t m) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(e.length), static_cast<Eigen::Index>(e.dim));
  for (std::size_t t = 0; t < e.length; ++t)
    for (std::size_t i = 0; i < e.dim; ++i) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = e(m, t, i);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  return sorted_quantile(v, 0.5);
}

json hyper_json(const RCHyper& h) {
  return {{"rho", h.rho}, {"k", h.k}, {"chi", h.chi}, {"alpha", h.alpha}, {"lambda", h.lambda}};
}

std::vector<std::size_t> top_peaks(const std::vector<std::size_t>& hist, std::size_t n) {
  std::vector<std::size_t> idx;
  for (std::size_t p = 0; p < hist.size(); ++p) {
    const std::size_t left = p > 0 ? hist[p - 1] : 0, right = p + 1 < hist.size() ? hist[p + 1] : 0;
    if (hist[p] > 0 && hist[p] >= left && hist[p] > right) idx.push_back(p);
  }
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return hist[a] > hist[b]; });
  if (idx.size() > n) idx.resize(n);
  for (auto& p : idx) ++p;  // lags start at 1
  return idx;
}

// Sign agreement of the centred per-time variance of dimension 0.
double variance_sign_agreement(const EnsembleView& a, const EnsembleView& b) {
  std::vector<double> va(a.length), vb(b.length);
  for (std::size_t t = 0; t < a.length; ++t) {
    va[t] = std::pow(snapshot_moments(a, t).std[0], 2);
    vb[t] = std::pow(snapshot_moments(b, t).std[0], 2);
  }
  const double ma = std::accumulate(va.begin(), va.end(), 0.0) / static_cast<double>(va.size());
  const double mb = std::accumulate(vb.begin(), vb.end(), 0.0) / static_cast<double>(vb.size());
  std::size_t agree = 0;
  for (std::size_t t = 0; t < va.size(); ++t) agree += ((va[t] - ma) >= 0.0) == ((vb[t] - mb) >= 0.0);
  return static_cast<double>(agree) / static_cast<double>(va.size());
}

}  // namespace

std::uint64_t stream_seed(const ExperimentConfig& c, const char* name) { return derive_seed(c.seed, std::string(name)); }

std::size_t count_modes(const std::vector<double>& x, std::size_t bins, double min_fraction) {
  if (x.empty()) return 0;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (!(*hi > *lo)) return 1;
  const DensityGrid g = density_grid(x, bins, *lo, *hi);
  std::vector<double> s(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    double acc = 0.0, w = 0.0;
    for (int o = -2; o <= 2; ++o) {
      const auto j = static_cast<std::ptrdiff_t>(k) + o;
      if (j < 0 || j >= static_cast<std::ptrdiff_t>(bins)) continue;
      const double wt = 3.0 - std::abs(o);
      acc += wt * g.density[static_cast<std::size_t>(j)];
      w += wt;
    }
    s[k] = acc / w;
  }
  const double peak = *std::max_element(s.begin(), s.end());
  // Count maxima separated by a dip below 70% of the smaller neighbour peak.
  std::size_t modes = 0;
  double last_peak = -1.0, valley = 0.0;
  bool rising = true;
  for (std::size_t k = 0; k < bins; ++k) {
    const double prev = k > 0 ? s[k - 1] : 0.0, next = k + 1 < bins ? s[k + 1] : 0.0;
    if (s[k] >= prev && s[k] > next && s[k] >= min_fraction * peak) {
      if (last_peak < 0.0 || valley < 0.7 * std::min(last_peak, s[k])) {
        ++modes;
        last_peak = s[k];
      } else {
        last_peak = std::max(last_peak, s[k]);
      }
      valley = s[k];
      rising = false;
    } else if (!rising) {
      valley = std::min(valley, s[k]);
    }
  }
  return modes;
}

Ensemble simulate_data(const ExperimentConfig& c) {
  const SystemSpec spec = c.system_spec();
  SimConfig sc = c.sim;
  sc.seed = stream_seed(c, "simulate");
  Ensemble e = simulate_ensemble(spec, sc);
  e.meta = {c.system, c.seed, config_hash(c)};
  return e;
}

BOSearchResult search_hyper(const ExperimentConfig& c, const EnsembleView& data) {
  const SplitViews v = split(data, c.split);
  Ensemble ts, vs;
  EnsembleView train = v.train, valid = v.valid;
  if (c.standardize) {
    const Scaler s = fit_scaler(v.train);
    ts = apply_scaler(v.train, s);
    vs = apply_scaler(v.valid, s);
    train = ts.view();
    valid = vs.view();
  }
  BOConfig bo = c.bo;
  bo.seed = stream_seed(c, "bo");
  return bo_search(make_rc_objective(train, valid, c.split.warm, c.n_nodes, stream_seed(c, "reservoir"), c.variant), bo);
}

RCNFTrainResult train_model(const ExperimentConfig& c, const EnsembleView& data) {
  const SplitViews v = split(data, c.split);
  return train_rcnf(v.train, v.valid, c.train_config());
}

EnsembleView test_warmups(const ExperimentConfig& c, const EnsembleView& data) {
  const std::size_t start = c.split.train + c.split.valid;
  EnsembleView w = data.time_slice(start - c.split.warm, c.split.warm);
  return c.forecast_paths ? w.traj_slice(0, c.forecast_paths) : w;
}

EnsembleView test_reference(const ExperimentConfig& c, const EnsembleView& data) {
  EnsembleView t = data.time_slice(c.split.train + c.split.valid, c.split.test);
  return c.forecast_paths ? t.traj_slice(0, c.forecast_paths) : t;
}

ForecastResult forecast_test(const ExperimentConfig& c, const RCNFModel& model, const EnsembleView& data,
                             NoiseMode noise) {
  return forecast_ensemble(model, test_warmups(c, data), c.split.test, stream_seed(c, "forecast"), noise);
}

std::string evaluate_forecast(const ExperimentConfig& c, const EnsembleView& forecast, const EnsembleView& reference,
                              const std::string& dir, const std::string& prefix) {
  json out;
  if (forecast.n_traj == 0) {
    out["n_paths"] = 0;
    return out.dump();
  }
  const auto metrics = snapshot_metrics(forecast, reference, c.diagnostics.bins);
  write_snapshot_csv(join(dir, prefix + "metrics.csv"), metrics);
  out["n_paths"] = forecast.n_traj;
  out["mean_w2"] = mean_w2(metrics);
  out["mean_kl"] = mean_kl(metrics);
  out["pooled_w2"] = wasserstein2(pooled_states(forecast), pooled_states(reference));
  const Moments term = snapshot_moments(forecast, forecast.length - 1);
  out["terminal_mean"] = term.mean;
  out["terminal_std"] = term.std;
  if (forecast.n_traj >= 10)
    write_json(join(dir, prefix + "bands.json"),
               bands_json(quantile_bands(forecast, c.diagnostics.band_levels), forecast.dt_obs, forecast.t0));
  return out.dump();
}

std::string run_experiment(const ExperimentConfig& c, const std::string& dir, const Logger& log) {
  c.validate();
  fs::create_directories(dir);
  const std::string hash = config_hash(c);
  {
    json cj = json::parse(config_to_json(c));
    cj["config_hash"] = hash;
    write_json(join(dir, "config.json"), cj.dump(2));
  }
  const SystemSpec spec = c.system_spec();
  json summary = {{"system", c.system}, {"scale", c.scale}, {"config_hash", hash}, {"seed", c.seed}};

  say(log, "simulating " + std::to_string(c.sim.n_traj) + " trajectories of " + c.system);
  Ensemble data = simulate_data(c);
  save_ensemble(data, join(dir, "data.trj"));

  RCNFTrainConfig tc = c.train_config();
  say(log, tc.fixed_hyper ? "training with fixed hyperparameters" : "searching hyperparameters");
  const SplitViews views = split(data.view(), c.split);
  RCNFTrainResult trained = train_rcnf(views.train, views.valid, tc);
  if (trained.search) {
    std::ofstream os(join(dir, "bo_trace.csv"));
    write_trace_csv(os, trained.search->trace);
    summary["bo_best_loss"] = trained.search->best_loss;
  }
  const RCNFModel& model = trained.model;
  {
    json prov = json::parse(model.provenance);
    prov["config_hash"] = hash;
    RCNFModel stamped = model;
    stamped.provenance = prov.dump();
    stamped.save(join(dir, "model.rcnf"));
    summary["hyper"] = prov["hyper"];
  }
  summary["searched"] = trained.search.has_value();
  summary["readout_residual"] = trained.readout.relative_residual;
  summary["flow_nll"] = trained.flow_loss.empty() ? 0.0 : trained.flow_loss.back();
  summary["flow_nll_initial"] = trained.flow_loss.empty() ? 0.0 : trained.flow_loss.front();

  say(log, "forecasting the test segment");
  const EnsembleView reference = test_reference(c, data.view());
  ForecastResult fc = forecast_test(c, model, data.view(), NoiseMode::kFlow);
  ForecastResult rc = forecast_test(c, model, data.view(), NoiseMode::kZero);
  fc.paths.meta = rc.paths.meta = {c.system, c.seed, hash};
  save_ensemble(fc.paths, join(dir, "forecast.trj"));
  save_ensemble(rc.paths, join(dir, "baseline.trj"));
  summary["n_diverged"] = fc.diverged.size();
  summary["n_diverged_rc"] = rc.diverged.size();

  // Metrics only over paths that survived in the forecast; the reference keeps all paths.
  summary["rcnf"] = json::parse(evaluate_forecast(c, fc.paths.view(), reference, dir, "rcnf_"));
  summary["rc"] = json::parse(evaluate_forecast(c, rc.paths.view(), reference, dir, "rc_"));
  {
    const Moments dm = snapshot_moments(reference, reference.length - 1);
    summary["data"] = {{"terminal_mean", dm.mean}, {"terminal_std", dm.std}};
    write_json(join(dir, "data_bands.json"),
               bands_json(quantile_bands(reference, c.diagnostics.band_levels), reference.dt_obs, reference.t0));
  }
  {
    // Snapshot densities on a shared grid for plotting.
    std::vector<std::pair<std::string, DensityGrid>> grids;
    const std::size_t n = reference.length;
    for (std::size_t q : {std::size_t{0}, n / 4, n / 2, 3 * n / 4, n - 1}) {
      for (std::size_t i = 0; i < reference.dim; ++i) {
        const std::vector<double> r = reference.snapshot(q, i);
        std::vector<double> f = fc.paths.n_traj() ? fc.paths.view().snapshot(q, i) : std::vector<double>{};
        std::vector<double> all = r;
        all.insert(all.end(), f.begin(), f.end());
        const auto [lo, hi] = std::minmax_element(all.begin(), all.end());
        if (!(*hi > *lo)) continue;
        const std::string tag = "t" + std::to_string(q) + "_x" + std::to_string(i);
        grids.emplace_back("data_" + tag, density_grid(r, 60, *lo, *hi));
        if (!f.empty()) grids.emplace_back("rcnf_" + tag, density_grid(f, 60, *lo, *hi));
      }
    }
    write_json(join(dir, "density.json"), density_json(grids));
  }

  // System-specific references.
  const double t_end = reference.t0 + static_cast<double>(reference.length - 1) * reference.dt_obs;
  if (c.system == "ou") {
    const double x0 = c.sim.init.ranges.empty() && !c.sim.init.fixed.empty() ? c.sim.init.fixed[0] : 0.0;
    const MeanVar mv = ou_closed_form(spec.param("b0"), spec.param("mu0"), spec.diffusion[0], x0, t_end);
    summary["closed_form"] = {{"terminal_mean", mv.mean},
                              {"terminal_std", std::sqrt(mv.var)},
                              {"stationary_std", spec.diffusion[0] / std::sqrt(2.0 * spec.param("b0"))},
                              {"t_end", t_end}};
  }
  if (c.system == "linear_sdde") {
    const std::size_t k = static_cast<std::size_t>(std::llround(1.0 / c.sim.dt_obs));
    if (k < data.length()) {
      const Moments m = snapshot_moments(data.view(), k);
      const double n = static_cast<double>(data.n_traj());
      const double var = m.std[0] * m.std[0];
      // Standard errors of the sample mean and variance (Gaussian marginal).
      const MeanVar cf = linear_sdde_closed_form(1.0);
      summary["sdde_t1"] = {{"mean", m.mean[0]}, {"var", var}, {"se_mean", std::sqrt(var / n)},
                            {"se_var", var * std::sqrt(2.0 / (n - 1.0))}, {"closed_mean", cf.mean},
                            {"closed_var", cf.var}};
    }
  }
  if (c.system == "van_der_pol" && fc.paths.n_traj() > 0)
    summary["variance_sign_agreement"] = variance_sign_agreement(reference, fc.paths.view());
  if (c.system == "enso" && fc.paths.n_traj() > 0) {
    const std::size_t last = reference.length - 1;
    summary["modes"] = {{"data", count_modes(reference.snapshot(last, 0))},
                        {"rcnf", count_modes(fc.paths.view().snapshot(last, 0))}};
  }

  const DiagnosticsConfig& dg = c.diagnostics;
  if (dg.transition) {
    say(log, "transition-rate ensembles");
    std::vector<std::pair<std::string, RateFit>> fits;
    json tj;
    const double dt = c.sim.dt_obs;
    const std::size_t len = static_cast<std::size_t>(std::llround(dg.transition_t_hi / dt)) + 1;
    if (len <= c.split.warm + 1) throw ValidationError("diagnostics.transition_t_hi: shorter than the warm-up");
    for (const Region from : {Region::kA, Region::kB}) {
      const bool a = from == Region::kA;
      const std::string tag = a ? "ab" : "ba";
      SimConfig sc = c.sim;
      sc.n_traj = dg.transition_paths;
      sc.n_obs = len;
      sc.init = InitialCondition{{a ? -1.0 : 1.0}, {}};
      sc.seed = stream_seed(c, a ? "transition_a" : "transition_b");
      const Ensemble ref = simulate_ensemble(spec, sc);
      const RateFit data_fit = transition_rate(ref, from, dg.transition_t_lo, dg.transition_t_hi);
      Ensemble gen;
      std::size_t n_div = 0;
      {
        ForecastResult g = forecast_ensemble(model, ref.view().time_slice(0, c.split.warm), len - c.split.warm,
                                             stream_seed(c, a ? "generate_a" : "generate_b"));
        n_div = g.diverged.size();
        gen = Ensemble(g.path_index.size(), len, 1, dt, 0.0);
        for (std::size_t j = 0; j < g.path_index.size(); ++j) {
          for (std::size_t t = 0; t < c.split.warm; ++t) gen(j, t, 0) = ref(g.path_index[j], t, 0);
          for (std::size_t t = 0; t < len - c.split.warm; ++t) gen(j, c.split.warm + t, 0) = g.paths(j, t, 0);
        }
      }
      const RateFit gen_fit = transition_rate(gen, from, dg.transition_t_lo, dg.transition_t_hi);
      fits.emplace_back("data_" + tag, data_fit);
      fits.emplace_back("rcnf_" + tag, gen_fit);
      tj["k_" + tag] = data_fit.slope;
      tj["k_" + tag + "_rcnf"] = gen_fit.slope;
      tj["n_diverged_" + tag] = n_div;
      // Curves for plotting, every 10th point.
      std::vector<double> tt, rd, rg;
      for (std::size_t t = 0; t < len; t += 10) {
        tt.push_back(data_fit.times[t]);
        rd.push_back(data_fit.ratio[t]);
        rg.push_back(gen_fit.ratio[t]);
      }
      json curves = {{"time", tt}, {"data", rd}, {"rcnf", rg}};
      write_json(join(dir, "transition_" + tag + ".json"), curves.dump());
    }
    write_rate_csv(join(dir, "rates.csv"), fits);
    tj["paths"] = dg.transition_paths;
    tj["window"] = {dg.transition_t_lo, dg.transition_t_hi};
    summary["transition"] = tj;
  }

  if (dg.mle && fc.paths.n_traj() > 0) {
    say(log, "Lyapunov exponents");
    const double dt = reference.dt_obs;
    auto mles = [&](const EnsembleView& e) {
      std::vector<double> out(e.n_traj);
      parallel_for(e.n_traj, [&](std::size_t m) { out[m] = max_lyapunov(trajectory(e, m), dt).exponent; });
      return out;
    };
    const std::vector<double> md = mles(reference), mf = mles(fc.paths.view());
    std::vector<double> mr;
    if (rc.paths.n_traj() > 0) mr = mles(rc.paths.view());
    std::ofstream os(join(dir, "mle.csv"));
    os.precision(10);
    os << "source,path,mle\n";
    for (std::size_t m = 0; m < md.size(); ++m) os << "data," << m << ',' << md[m] << '\n';
    for (std::size_t m = 0; m < mf.size(); ++m) os << "rcnf," << fc.path_index[m] << ',' << mf[m] << '\n';
    for (std::size_t m = 0; m < mr.size(); ++m) os << "rc," << rc.path_index[m] << ',' << mr[m] << '\n';
    summary["mle"] = {{"data_median", median(md)}, {"rcnf_median", median(mf)}, {"rc_median", median(mr)},
                      {"n_data", md.size()}, {"n_rcnf", mf.size()}};
  }

  if (dg.close_returns && fc.paths.n_traj() > 0) {
    const std::size_t p_max = std::min<std::size_t>(900, reference.length - 1);
    const std::size_t t_max = std::min<std::size_t>(1000, reference.length - p_max);
    const CloseReturnsMap cd = close_returns(trajectory(reference, fc.path_index[0]), dg.close_scale, t_max, p_max);
    const CloseReturnsMap cf = close_returns(trajectory(fc.paths.view(), 0), dg.close_scale, t_max, p_max);
    json j = {{"data", json::parse(close_returns_json(cd))}, {"rcnf", json::parse(close_returns_json(cf))}};
    write_json(join(dir, "close_returns.json"), j.dump());
    summary["close_returns"] = {{"data_peaks", top_peaks(cd.histogram, 5)}, {"rcnf_peaks", top_peaks(cf.histogram, 5)}};
  }

  if (dg.long_generation > 0) {
    say(log, "long generated trajectories");
    const std::size_t n = dg.long_generation, w = dg.long_warm;
    if (w == 0 || w > data.length()) throw ValidationError("diagnostics.long_warm: must lie in [1, sim.n_obs]");
    Eigen::MatrixXd warm = trajectory(data.view().time_slice(0, w), 0);
    json lj;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> series;
    SimConfig sc = c.sim;
    sc.n_traj = 1;
    sc.n_obs = n;
    sc.seed = stream_seed(c, "long_scheme");
    Ensemble scheme = simulate_ensemble(spec, sc);
    series.emplace_back("scheme", trajectory(scheme.view(), 0));
    for (const auto& [name, mode] : {std::pair{std::string("rcnf"), NoiseMode::kFlow}, std::pair{std::string("rc"), NoiseMode::kZero}}) {
      try {
        series.emplace_back(name, generate(model, warm, n, stream_seed(c, "long_generate"), mode));
      } catch (const DivergenceError& e) {
        lj[name + "_diverged"] = true;
      }
    }
    json corr;
    std::vector<std::pair<std::string, DensityGrid>> dens;
    const Eigen::MatrixXd& ref = series.front().second;
    const Eigen::RowVectorXd lo = ref.colwise().minCoeff(), hi = ref.colwise().maxCoeff();
    std::vector<std::vector<double>> ref_corr;
    for (const auto& [name, traj] : series) {
      const Eigen::RowVectorXd tlo = traj.colwise().minCoeff(), thi = traj.colwise().maxCoeff();
      bool within = true;
      for (Eigen::Index i = 0; i < traj.cols(); ++i) {
        const double pad = 0.2 * (hi[i] - lo[i]);
        within = within && tlo[i] >= lo[i] - pad && thi[i] <= hi[i] + pad;
        std::vector<double> col(traj.col(i).data(), traj.col(i).data() + traj.rows());
        dens.emplace_back(name + "_x" + std::to_string(i), density_grid(col, 80, lo[i] - pad, hi[i] + pad));
      }
      lj[name + "_within_range"] = within;
      if (dg.correlation) {
        const std::size_t lag = std::min(dg.correlation_lag, static_cast<std::size_t>(traj.rows()) - 1);
        try {
          const auto r = acf_ccf(traj, lag);
          corr[name] = json::parse(correlation_json(r, static_cast<std::size_t>(traj.cols())));
          if (name == "scheme") {
            ref_corr = r;
          } else if (!ref_corr.empty()) {
            double worst = 0.0;
            for (std::size_t a = 0; a < r.size(); ++a)
              for (std::size_t p = 0; p < r[a].size(); ++p) worst = std::max(worst, std::abs(r[a][p] - ref_corr[a][p]));
            lj[name + "_max_corr_diff"] = worst;
          }
        } catch (const ValidationError&) {
          lj[name + "_degenerate"] = true;
        }
      }
    }
    write_json(join(dir, "long_density.json"), density_json(dens));
    if (dg.correlation) write_json(join(dir, "correlation.json"), corr.dump());
    lj["length"] = n;
    summary["long"] = lj;
  }

  if (dg.esn_contrast) {
    say(log, "training the ESN variant");
    ExperimentConfig ec = c;
    ec.variant = c.variant == Variant::kEsn ? Variant::kRc : Variant::kEsn;
    RCNFTrainResult et = train_rcnf(views.train, views.valid, ec.train_config());
    ForecastResult ef = forecast_test(ec, et.model, data.view(), NoiseMode::kFlow);
    const std::string name = variant_name(ec.variant) + "_";
    json ej = json::parse(evaluate_forecast(ec, ef.paths.view(), reference, dir, name));
    ej["n_diverged"] = ef.diverged.size();
    ej["hyper"] = hyper_json(et.search ? et.search->best : *ec.fixed_hyper);
    summary[variant_name(ec.variant)] = ej;
  }

  if (dg.noiseless_mle) {
    say(log, "noiseless reference exponent");
    std::map<std::string, double> p = c.params;
    p["g"] = 0.0;
    const SystemSpec quiet = builtin_system(c.system, p);
    const std::size_t transient = 1000;
    SimConfig sc = c.sim;
    sc.n_traj = 1;
    sc.n_obs = dg.noiseless_length + transient;
    sc.seed = stream_seed(c, "noiseless");
    const Ensemble q = simulate_ensemble(quiet, sc);
    const Eigen::MatrixXd traj = trajectory(q.view().time_slice(transient, dg.noiseless_length), 0);
    // Skip the alignment phase at the start of the divergence curve.
    LyapunovConfig lc;
    lc.horizon = std::min<std::size_t>(1000, dg.noiseless_length / 5);
    lc.fit_begin = 0.05;
    lc.fit_fraction = 0.3;
    const LyapunovResult lr = max_lyapunov(traj, c.sim.dt_obs, lc);
    summary["noiseless_mle"] = {{"mle", lr.exponent}, {"length", dg.noiseless_length},
                                {"min_separation", lr.min_separation}};
  }

  const std::string text = summary.dump(2);
  write_json(join(dir, "summary.json"), text);
  say(log, "done: " + join(dir, "summary.json"));
  return text;
}

}  // namespace rcnf
