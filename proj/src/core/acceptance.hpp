#pragma once

#include <string>
#include <vector>

namespace pf {

/// Outcome of one acceptance criterion, with the measured quantities that
/// decided it spelled out in `detail`.
struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

/// Runs one criterion (1..10). Tolerances are pinned inside; failures are
/// reported, never masked.
CriterionResult run_acceptance_criterion(int id);

/// Runs the listed criteria in order (all ten when ids is empty).
std::vector<CriterionResult> run_acceptance(const std::vector<int>& ids = {});

}  // namespace pf
