#pragma once

#include <string>
#include <vector>

namespace camel::cli {

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double threshold = 0.0;  // pass when measured <= threshold
  bool pass = false;
};

/// Gradient checks on every op, update-rule algebra, Beta uniformity, blur
/// identities, memory FIFO and hard-negative oracles, metric oracles and the
/// checkpoint round trip.
std::vector<CheckResult> run_selfcheck();

std::string format_report(const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace camel::cli
