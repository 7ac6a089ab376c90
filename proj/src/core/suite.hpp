#pragma once

#include <string>
#include <vector>

#include "core/report.hpp"

namespace pf {

struct SuiteStep {
  std::string name;
  bool pass = false;
  double seconds = 0.0;
  std::string detail;
};

/// Aggregate outcome of a named preset battery. The serialized forms
/// (summary()/to_json()) carry no timings, so suite outputs re-run
/// byte-identically; wall times stay on the in-memory steps.
struct SuiteResult {
  std::string preset;
  std::vector<SuiteStep> steps;
  bool all_pass = true;

  Csv summary() const;
  Json to_json() const;
};

std::vector<std::string> suite_presets();

/// Runs a preset. With a nonempty out_dir each step writes its artifacts under
/// out_dir/<step>/ and the suite writes summary.csv + suite.json at the top.
SuiteResult run_suite(const std::string& preset, const std::string& out_dir = "");

}  // namespace pf
