// rcnf command-line driver.

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcnf/config.hpp"
#include "rcnf/diagnostics.hpp"
#include "rcnf/errors.hpp"
#include "rcnf/experiment.hpp"
#include "rcnf/kernels.hpp"
#include "rcnf/report.hpp"
#include "rcnf/rng.hpp"

namespace fs = std::filesystem;
using namespace rcnf;

namespace {

class DirLock {
 public:
  explicit DirLock(const std::string& dir) {
    fs::create_directories(dir);
    path_ = (fs::path(dir) / ".rcnf.lock").string();
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) throw IoError("output directory " + dir + " is locked by another run (remove " + path_ + " if stale)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    (void)!::write(fd_, pid.data(), pid.size());
  }
  ~DirLock() {
    ::close(fd_);
    ::unlink(path_.c_str());
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  std::string path_;
  int fd_ = -1;
};

struct Common {
  std::string config;
  std::string system;
  std::string scale = "desk";
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON experiment config");
  app->add_option("--system", c.system, "built-in preset name (used when no --config is given)");
  app->add_option("--scale", c.scale, "preset scale: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  app->add_option("--set", c.sets, "override a config field, e.g. --set sim.n_traj=100")->take_all();
  app->add_option("--seed", c.seed, "master seed");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg;
  if (!c.config.empty()) cfg = load_config(c.config);
  else if (!c.system.empty()) cfg = preset(c.system, c.scale);
  else throw ValidationError("either --config or --system is required");
  if (c.seed) cfg.seed = *c.seed;
  cfg = apply_overrides(cfg, c.sets);
  cfg.validate();
  return cfg;
}

Logger stderr_log() {
  return [](const std::string& s) { std::cerr << "[rcnf] " << s << '\n'; };
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << text << '\n';
}

Ensemble data_or_simulate(const ExperimentConfig& cfg, const std::string& path) {
  if (!path.empty()) return load_ensemble(path);
  return simulate_data(cfg);
}

RCHyper parse_hypers(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    try {
      v.push_back(std::stod(tok));
    } catch (...) {
      throw ValidationError("--fixed-hypers: '" + tok + "' is not a number");
    }
  }
  if (v.size() != 5) throw ValidationError("--fixed-hypers: expected rho,k,chi,alpha,lambda");
  RCHyper h{v[0], static_cast<int>(std::lround(v[1])), v[2], v[3], v[4]};
  h.validate_ranges();
  return h;
}

Eigen::MatrixXd path_matrix(const EnsembleView& e, std::size_t m, std::size_t len) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(e.dim));
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t i = 0; i < e.dim; ++i) out(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) = e(m, t, i);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reservoir computing with normalizing-flow noise for SDE/SDDE forecasting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "rcnf 1.0");

  Common sim_c, bo_c, train_c, fc_c, exp_c;
  std::string sim_out = "data.trj";
  auto* sim = app.add_subcommand("simulate", "simulate an ensemble (TRJ1)");
  add_common(sim, sim_c);
  sim->add_option("--out", sim_out, "output TRJ1 file");

  std::string bo_data, bo_dir = "bo";
  auto* bo = app.add_subcommand("bo-search", "Bayesian hyperparameter search");
  add_common(bo, bo_c);
  bo->add_option("--data", bo_data, "TRJ1 ensemble (simulated when omitted)");
  bo->add_option("--out-dir", bo_dir, "directory for bo_trace.csv and best_hyper.json");

  std::string tr_data, tr_out = "model.rcnf", tr_hyp;
  auto* train = app.add_subcommand("train", "train an RC-NF model");
  add_common(train, train_c);
  train->add_option("--data", tr_data, "TRJ1 ensemble (simulated when omitted)");
  train->add_option("--fixed-hypers", tr_hyp, "rho,k,chi,alpha,lambda; skips the search");
  train->add_option("--out", tr_out, "output model file");

  std::string fc_model, fc_data, fc_out = "forecast.trj";
  bool fc_zero = false;
  auto* fcst = app.add_subcommand("forecast", "stochastic rolling forecast of the test segment");
  add_common(fcst, fc_c);
  fcst->add_option("--model", fc_model, "RC-NF model file")->required();
  fcst->add_option("--data", fc_data, "TRJ1 ensemble holding the warm-ups")->required();
  fcst->add_flag("--no-noise", fc_zero, "deterministic RC baseline");
  fcst->add_option("--out", fc_out, "output TRJ1 file");

  std::string gen_model, gen_warm, gen_out = "generated.trj";
  std::size_t gen_len = 1000, gen_paths = 1, gen_warm_len = 0;
  std::uint64_t gen_seed = 1;
  bool gen_zero = false;
  auto* gen = app.add_subcommand("generate", "generate trajectories after a warm-up");
  gen->add_option("--model", gen_model, "RC-NF model file")->required();
  gen->add_option("--warmup", gen_warm, "TRJ1 file; the first states of each path are the warm-up")->required();
  gen->add_option("--warm", gen_warm_len, "warm-up length (default: the model's)");
  gen->add_option("--length", gen_len, "generated length");
  gen->add_option("--paths", gen_paths, "number of paths (one per warm-up trajectory)");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_flag("--no-noise", gen_zero, "deterministic RC baseline");
  gen->add_option("--out", gen_out, "output TRJ1 file");

  std::string dg_fc, dg_ref, dg_dir = "diagnostics";
  bool dg_mle = false, dg_cr = false, dg_tr = false;
  std::size_t dg_acf = 0, dg_bins = kDefaultBins;
  double dg_lo = 5.0, dg_hi = 25.0, dg_scale = 1e-2;
  auto* diag = app.add_subcommand("diagnose", "distributional and dynamical diagnostics");
  diag->add_option("--forecast", dg_fc, "TRJ1 ensemble to score")->required();
  diag->add_option("--reference", dg_ref, "reference TRJ1 ensemble of the same shape");
  diag->add_option("--bins", dg_bins, "histogram bins for KL");
  diag->add_flag("--mle", dg_mle, "maximal Lyapunov exponent per path");
  diag->add_flag("--close-returns", dg_cr, "close-returns histogram of the first path");
  diag->add_option("--close-scale", dg_scale, "close-returns threshold scale");
  diag->add_option("--acf", dg_acf, "ACF/CCF of the first path up to this lag");
  diag->add_flag("--transition", dg_tr, "transition-rate fits (1-d)");
  diag->add_option("--t-lo", dg_lo, "transition fit window start");
  diag->add_option("--t-hi", dg_hi, "transition fit window end");
  diag->add_option("--out-dir", dg_dir, "output directory");

  std::string exp_name, exp_dir;
  auto* exp = app.add_subcommand("experiment", "full pipeline for a named preset");
  exp->add_option("preset", exp_name, "ou, double_well, van_der_pol, mmo, linear_sdde, enso or lorenz")->required();
  exp->add_option("--scale", exp_c.scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  exp->add_option("--set", exp_c.sets, "override a config field")->take_all();
  exp->add_option("--seed", exp_c.seed, "master seed");
  exp->add_option("--out", exp_dir, "output directory (default runs/<preset>-<scale>)");

  std::string rep_dir;
  auto* rep = app.add_subcommand("report", "consolidated pass/fail summary of experiment results");
  rep->add_option("dir", rep_dir, "results directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sim) {
      const ExperimentConfig cfg = resolve(sim_c);
      const Ensemble e = simulate_data(cfg);
      save_ensemble(e, sim_out);
      std::cout << sim_out << ": " << e.n_traj() << " x " << e.length() << " x " << e.dim() << " (config "
                << config_hash(cfg) << ")\n";
    } else if (*bo) {
      const ExperimentConfig cfg = resolve(bo_c);
      DirLock lock(bo_dir);
      const Ensemble data = data_or_simulate(cfg, bo_data);
      const BOSearchResult r = search_hyper(cfg, data.view());
      std::ofstream os(fs::path(bo_dir) / "bo_trace.csv");
      write_trace_csv(os, r.trace);
      const nlohmann::json j = {{"rho", r.best.rho}, {"k", r.best.k}, {"chi", r.best.chi}, {"alpha", r.best.alpha},
                                {"lambda", r.best.lambda}, {"loss", r.best_loss}, {"config_hash", config_hash(cfg)},
                                {"seed", cfg.seed}};
      write_text((fs::path(bo_dir) / "best_hyper.json").string(), j.dump(2));
      std::cout << j.dump() << '\n';
    } else if (*train) {
      ExperimentConfig cfg = resolve(train_c);
      if (!tr_hyp.empty()) cfg.fixed_hyper = parse_hypers(tr_hyp);
      const Ensemble data = data_or_simulate(cfg, tr_data);
      const RCNFTrainResult r = train_model(cfg, data.view());
      RCNFModel m = r.model;
      nlohmann::json prov = nlohmann::json::parse(m.provenance);
      prov["config_hash"] = config_hash(cfg);
      m.provenance = prov.dump();
      m.save(tr_out);
      std::cout << tr_out << ": " << m.provenance << '\n';
    } else if (*fcst) {
      const ExperimentConfig cfg = resolve(fc_c);
      const RCNFModel model = RCNFModel::load(fc_model);
      const Ensemble data = load_ensemble(fc_data);
      ForecastResult r = forecast_test(cfg, model, data.view(), fc_zero ? NoiseMode::kZero : NoiseMode::kFlow);
      r.paths.meta = {cfg.system, cfg.seed, config_hash(cfg)};
      save_ensemble(r.paths, fc_out);
      std::cout << fc_out << ": " << r.paths.n_traj() << " paths, " << r.diverged.size() << " diverged\n";
    } else if (*gen) {
      const RCNFModel model = RCNFModel::load(gen_model);
      const Ensemble w = load_ensemble(gen_warm);
      const std::size_t wl = gen_warm_len ? gen_warm_len : model.warm;
      if (wl == 0 || wl > w.length()) throw ValidationError("--warm: must lie in [1, warm-up length]");
      if (gen_paths == 0 || gen_paths > w.n_traj()) throw ValidationError("--paths: exceeds the warm-up trajectories");
      std::vector<double> buf;
      buf.reserve(gen_paths * gen_len * w.dim());
      for (std::size_t m = 0; m < gen_paths; ++m) {
        const Eigen::MatrixXd g = generate(model, path_matrix(w.view(), m, wl), gen_len, derive_seed(gen_seed, m),
                                           gen_zero ? NoiseMode::kZero : NoiseMode::kFlow);
        for (Eigen::Index t = 0; t < g.rows(); ++t)
          for (Eigen::Index i = 0; i < g.cols(); ++i) buf.push_back(g(t, i));
      }
      Ensemble out(gen_paths, gen_len, w.dim(), w.dt_obs(), w.t0() + static_cast<double>(wl) * w.dt_obs(), std::move(buf));
      out.meta = {w.meta.system, gen_seed, w.meta.config_hash};
      save_ensemble(out, gen_out);
      std::cout << gen_out << ": " << gen_paths << " x " << gen_len << '\n';
    } else if (*diag) {
      DirLock lock(dg_dir);
      const Ensemble f = load_ensemble(dg_fc);
      nlohmann::json s;
      auto out = [&](const std::string& n) { return (fs::path(dg_dir) / n).string(); };
      if (!dg_ref.empty()) {
        const Ensemble r = load_ensemble(dg_ref);
        const auto m = snapshot_metrics(f.view(), r.view(), dg_bins);
        write_snapshot_csv(out("metrics.csv"), m);
        s["mean_w2"] = mean_w2(m);
        s["mean_kl"] = mean_kl(m);
        s["pooled_w2"] = wasserstein2(pooled_states(f.view()), pooled_states(r.view()));
      }
      if (f.n_traj() >= 10) write_json(out("bands.json"), bands_json(quantile_bands(f.view()), f.dt_obs(), f.t0()));
      if (dg_mle) {
        std::ofstream os(out("mle.csv"));
        os.precision(10);
        os << "path,mle\n";
        std::vector<double> v;
        for (std::size_t m = 0; m < f.n_traj(); ++m) {
          v.push_back(max_lyapunov(path_matrix(f.view(), m, f.length()), f.dt_obs()).exponent);
          os << m << ',' << v.back() << '\n';
        }
        std::sort(v.begin(), v.end());
        s["mle_median"] = sorted_quantile(v, 0.5);
        s["mle_q1"] = sorted_quantile(v, 0.25);
        s["mle_q3"] = sorted_quantile(v, 0.75);
      }
      if (dg_cr) {
        const std::size_t p_max = std::min<std::size_t>(900, f.length() - 1);
        const std::size_t t_max = std::min<std::size_t>(1000, f.length() - p_max);
        write_json(out("close_returns.json"),
                   close_returns_json(close_returns(path_matrix(f.view(), 0, f.length()), dg_scale, t_max, p_max)));
      }
      if (dg_acf > 0)
        write_json(out("correlation.json"),
                   correlation_json(acf_ccf(path_matrix(f.view(), 0, f.length()), dg_acf), f.dim()));
      if (dg_tr) {
        std::vector<std::pair<std::string, RateFit>> fits;
        for (const Region from : {Region::kA, Region::kB}) {
          try {
            fits.emplace_back(from == Region::kA ? "ab" : "ba", transition_rate(f.view(), from, dg_lo, dg_hi));
          } catch (const ValidationError& e) {
            std::cerr << "[rcnf] " << e.what() << '\n';
          }
        }
        write_rate_csv(out("rates.csv"), fits);
        for (const auto& [n, fit] : fits) s["k_" + n] = fit.slope;
      }
      s["source"] = {{"system", f.meta.system}, {"seed", f.meta.seed}, {"config_hash", f.meta.config_hash}};
      write_json(out("diagnostics.json"), s.dump(2));
      std::cout << s.dump() << '\n';
    } else if (*exp) {
      ExperimentConfig cfg = preset(exp_name, exp_c.scale);
      if (exp_c.seed) cfg.seed = *exp_c.seed;
      cfg = apply_overrides(cfg, exp_c.sets);
      cfg.validate();
      if (exp_dir.empty()) exp_dir = "runs/" + exp_name + "-" + exp_c.scale;
      DirLock lock(exp_dir);
      std::cerr << "[rcnf] kernels: " << kernels::isa_name(kernels::active_isa()) << '\n';
      run_experiment(cfg, exp_dir, stderr_log());
    } else if (*rep) {
      const Report r = build_report(rep_dir);
      std::cout << r.table;
      return r.pass ? 0 : 3;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
