#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/config.hpp"
#include "core/grid.hpp"
#include "core/report.hpp"

namespace pf {

/// One produced field container (saved as <name>.pfld by run_to_dir).
struct FieldOutput {
  std::string name;
  GridField field;
  std::vector<GridField::Chunk> chunks;
};

/// Everything one experiment produces, kept in memory so determinism can be
/// checked byte for byte without touching the filesystem.
struct RunOutput {
  Json report;                                               // report.json
  std::vector<std::pair<std::string, std::string>> files;    // name -> bytes (CSV, SVG)
  std::vector<FieldOutput> fields;
  std::vector<std::string> inputs;                           // config-named files that were read
  bool pass = true;
};

/// Executes the configured experiment. Reads only the input fields the config
/// names; writes nothing.
RunOutput run_experiment(const ExperimentConfig& cfg);

/// run_experiment plus writing report.json, tables, plots, field containers,
/// and manifest.json under cfg.output_dir (default "out").
RunManifest run_to_dir(const ExperimentConfig& cfg, RunOutput* result_out = nullptr);

}  // namespace pf
