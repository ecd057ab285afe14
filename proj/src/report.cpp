#include "rcnf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "rcnf/errors.hpp"

namespace rcnf {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

double num(const json& j, const std::vector<std::string>& path) {
  const json* p = &j;
  for (const auto& k : path) {
    if (!p->is_object() || !p->contains(k)) return std::nan("");
    p = &(*p)[k];
  }
  if (p->is_array()) p = p->empty() ? nullptr : &(*p)[0];
  if (!p || !p->is_number()) return std::nan("");
  return p->get<double>();
}

Check make(std::string id, std::string desc, int criterion, double v, double r, double tol, std::string rel,
           bool gated = true) {
  Check c{std::move(id), std::move(desc), criterion, gated, v, r, tol, std::move(rel), false};
  if (c.relation == "|v-r|<=tol") c.pass = std::abs(v - r) <= tol;
  else if (c.relation == "v<=r") c.pass = v <= r;
  else if (c.relation == "v<r") c.pass = v < r;
  else if (c.relation == "v>=r") c.pass = v >= r;
  if (!std::isfinite(v)) c.pass = false;
  return c;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<std::string> expected_artifacts() {
  return {"config.json", "summary.json", "model.rcnf", "data.trj", "forecast.trj", "rcnf_metrics.csv"};
}

std::vector<Check> evaluate_checks(const std::string& text) {
  const json s = json::parse(text);
  const std::string sys = s.value("system", ""), scale = s.value("scale", "desk");
  const bool paper = scale == "paper";
  std::vector<Check> out;
  if (sys == "ou") {
    const double st = num(s, {"closed_form", "stationary_std"});
    out.push_back(make("ou.terminal_mean", "RC-NF terminal mean vs closed form", 1, num(s, {"rcnf", "terminal_mean"}),
                       num(s, {"closed_form", "terminal_mean"}), 0.15, "|v-r|<=tol"));
    out.push_back(make("ou.terminal_std", "RC-NF terminal std vs stationary std", 1, num(s, {"rcnf", "terminal_std"}), st,
                       0.2, "|v-r|<=tol"));
    out.push_back(make("ou.mean_w2", "RC-NF mean test-phase W2 (paper 1.2385e-2)", 1, num(s, {"rcnf", "mean_w2"}),
                       paper ? 2e-2 : 3e-2, 0.0, "v<=r"));
    out.push_back(make("ou.rc_std_ratio", "RC baseline terminal std / stationary std", 2,
                       num(s, {"rc", "terminal_std"}) / st, 0.5, 0.0, "v<r"));
    out.push_back(make("ou.rcnf_std", "RC-NF terminal std vs stationary std", 2, num(s, {"rcnf", "terminal_std"}), st, 0.2,
                       "|v-r|<=tol"));
    out.push_back(make("ou.mean_kl", "RC-NF mean KL (paper 2.6387e-3)", 1, num(s, {"rcnf", "mean_kl"}), 2.6387e-3, 0.0,
                       "v<=r", false));
  } else if (sys == "double_well") {
    const double gap = paper ? 1e-3 : 2e-3;
    const double kab = num(s, {"transition", "k_ab"}), kba = num(s, {"transition", "k_ba"});
    out.push_back(make("dw.k_ab_data", "data-side k_AB vs paper 1.4684e-2", 3, kab, 1.4684e-2, 3e-3, "|v-r|<=tol"));
    out.push_back(make("dw.k_ab_gap", "RC-NF k_AB vs data k_AB", 3, num(s, {"transition", "k_ab_rcnf"}), kab, gap,
                       "|v-r|<=tol"));
    out.push_back(make("dw.k_ba_gap", "RC-NF k_BA vs data k_BA", 3, num(s, {"transition", "k_ba_rcnf"}), kba, gap,
                       "|v-r|<=tol"));
    out.push_back(make("dw.k_ba_data", "data-side k_BA vs paper 1.4812e-2", 3, kba, 1.4812e-2, 3e-3, "|v-r|<=tol",
                       false));
    out.push_back(make("dw.k_ab_gap_paper", "RC-NF k_AB gap within the paper's 1e-3", 3,
                       num(s, {"transition", "k_ab_rcnf"}), kab, 1e-3, "|v-r|<=tol", false));
    out.push_back(make("dw.k_ba_gap_paper", "RC-NF k_BA gap within the paper's 1e-3", 3,
                       num(s, {"transition", "k_ba_rcnf"}), kba, 1e-3, "|v-r|<=tol", false));
  } else if (sys == "linear_sdde") {
    out.push_back(make("sdde.t1_mean", "simulated mean at t=1 vs 0.4 (5 standard errors)", 4,
                       num(s, {"sdde_t1", "mean"}), 0.4, 5.0 * num(s, {"sdde_t1", "se_mean"}), "|v-r|<=tol"));
    out.push_back(make("sdde.t1_var", "simulated variance at t=1 vs 1.0 (5 standard errors)", 4,
                       num(s, {"sdde_t1", "var"}), 1.0, 5.0 * num(s, {"sdde_t1", "se_var"}), "|v-r|<=tol"));
    out.push_back(make("sdde.mean_w2", "RC-NF mean test-phase W2 (paper 7.9967e-3)", 4, num(s, {"rcnf", "mean_w2"}),
                       paper ? 1.2e-2 : 2e-2, 0.0, "v<=r"));
    const double esn_paths = num(s, {"esn", "n_paths"});
    out.push_back(make("sdde.esn_completed", "ESN variant forecast paths", 7, esn_paths, 1.0, 0.0, "v>=r"));
    out.push_back(make("sdde.esn_mean_w2", "ESN-NF mean test-phase W2", 7, num(s, {"esn", "mean_w2"}),
                       num(s, {"rcnf", "mean_w2"}), 0.0, "v>=r", false));
  } else if (sys == "lorenz") {
    out.push_back(make("lorenz.mle_median", "median MLE, RC-NF vs data (paper 2.5622 vs 2.5557)", 5,
                       num(s, {"mle", "rcnf_median"}), num(s, {"mle", "data_median"}), 0.3, "|v-r|<=tol"));
    out.push_back(make("lorenz.mle_paths", "RC-NF paths in the MLE sample", 5, num(s, {"mle", "n_rcnf"}), 100.0, 0.0,
                       "v>=r"));
    out.push_back(make("lorenz.noiseless_mle", "noiseless Lorenz MLE vs 0.91", 5, num(s, {"noiseless_mle", "mle"}), 0.91,
                       0.15, "|v-r|<=tol"));
    out.push_back(make("lorenz.w2_order", "whole-test-set W2, RC-NF below plain RC", 5, num(s, {"rcnf", "pooled_w2"}),
                       num(s, {"rc", "pooled_w2"}), 0.0, "v<r"));
  } else if (sys == "van_der_pol") {
    out.push_back(make("vdp.variance_sign", "variance oscillation sign agreement", 0,
                       num(s, {"variance_sign_agreement"}), 0.7, 0.0, "v>=r"));
  } else if (sys == "enso") {
    out.push_back(make("enso.data_bimodal", "modes of the terminal data density", 0, num(s, {"modes", "data"}), 2.0, 0.0,
                       "v>=r"));
    out.push_back(make("enso.rcnf_bimodal", "modes of the terminal RC-NF density", 0, num(s, {"modes", "rcnf"}), 2.0,
                       0.0, "v>=r"));
  } else if (sys == "mmo") {
    out.push_back(make("mmo.paths", "non-diverged RC-NF paths", 0, num(s, {"rcnf", "n_paths"}), 1.0, 0.0, "v>=r"));
  }
  const double n = num(s, {"rcnf", "n_paths"}), nd = num(s, {"n_diverged"});
  out.push_back(make(sys + ".diverged_fraction", "fraction of diverged RC-NF paths", 0, nd / (n + nd), 0.05, 0.0, "v<=r",
                     false));
  return out;
}

Report build_report(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<fs::path> runs;
  if (fs::exists(fs::path(dir) / "summary.json")) {
    runs.push_back(dir);
  } else {
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory() && fs::exists(e.path() / "summary.json")) runs.push_back(e.path());
    std::sort(runs.begin(), runs.end());
  }
  if (runs.empty()) {
    std::string msg = "no experiment artifacts in " + dir + "; expected:";
    for (const auto& a : expected_artifacts()) msg += " " + a;
    throw IoError(msg);
  }
  json rj = json::object();
  json list = json::array();
  std::ostringstream table;
  bool all = true;
  for (const auto& run : runs) {
    std::vector<std::string> missing;
    for (const auto& a : expected_artifacts())
      if (!fs::exists(run / a)) missing.push_back(a);
    if (!missing.empty()) {
      std::string msg = "missing artifacts in " + run.string() + ":";
      for (const auto& m : missing) msg += " " + m;
      throw IoError(msg);
    }
    std::ifstream is(run / "summary.json");
    std::stringstream ss;
    ss << is.rdbuf();
    const json s = json::parse(ss.str());
    const std::vector<Check> checks = evaluate_checks(ss.str());
    json cj = json::array();
    table << "== " << s.value("system", "?") << " (" << s.value("scale", "?") << ", config " << s.value("config_hash", "?")
          << ")\n";
    for (const Check& c : checks) {
      const bool counted = c.gated;
      if (counted && !c.pass) all = false;
      cj.push_back({{"id", c.id}, {"description", c.description}, {"criterion", c.criterion}, {"gated", c.gated},
                    {"value", std::isfinite(c.value) ? json(c.value) : json(nullptr)},
                    {"reference", std::isfinite(c.reference) ? json(c.reference) : json(nullptr)},
                    {"tolerance", c.tolerance}, {"relation", c.relation}, {"pass", c.pass}});
      char line[256];
      std::snprintf(line, sizeof line, "  %-4s %-24s %-12s %-12s %-10s %s\n",
                    c.gated ? (c.pass ? "PASS" : "FAIL") : (c.pass ? "ok" : "info"), c.id.c_str(), fmt(c.value).c_str(),
                    fmt(c.reference).c_str(), c.relation.c_str(), c.description.c_str());
      table << line;
    }
    list.push_back({{"name", run.filename().string()}, {"system", s.value("system", "")}, {"checks", cj}});
  }
  rj["experiments"] = list;
  rj["pass"] = all;
  table << (all ? "ALL GATED CHECKS PASS\n" : "SOME GATED CHECKS FAIL\n");
  Report r{rj.dump(2), table.str(), all};
  std::ofstream(fs::path(dir) / "report.json") << r.json << '\n';
  std::ofstream(fs::path(dir) / "report.txt") << r.table;
  return r;
}

}  // namespace rcnf
