#pragma once

#include <string>
#include <vector>

namespace rcnf {

/// One pass/fail row. `criterion` is the acceptance-criterion number (0 for smoke checks);
/// ungated rows are informational and never fail a report.
struct Check {
  std::string id;
  std::string description;
  int criterion = 0;
  bool gated = true;
  double value = 0.0;
  double reference = 0.0;
  double tolerance = 0.0;
  std::string relation;  // "|v-r|<=tol", "v<=r", "v<r", "v>=r"
  bool pass = false;
};

/// Checks for one experiment summary (as written by run_experiment).
std::vector<Check> evaluate_checks(const std::string& summary_json);

struct Report {
  std::string json;
  std::string table;
  bool pass = false;
};

/// Summarises `dir`, which is one experiment directory or a directory of them. Writes
/// report.json and report.txt into `dir`. Throws IoError listing missing artifacts.
Report build_report(const std::string& dir);

std::vector<std::string> expected_artifacts();

}  // namespace rcnf
