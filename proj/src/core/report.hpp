#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/config.hpp"

namespace pf {

using Json = nlohmann::ordered_json;

/// Canonical CSV: header row plus string cells, '\n' endings, no quoting
/// (cells must not contain commas or newlines).
struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> cells);
  std::string serialize() const;
};

/// Report skeleton shared by every operation: selector, config hash, and the
/// artifact version. Tolerances and results are added by the caller.
Json base_report(const ExperimentConfig& cfg);

/// Provenance record written next to the outputs. Timestamps live only here,
/// never inside reports or tables, so numeric outputs stay bit-identical
/// across re-runs.
struct RunManifest {
  std::string config_hash;
  std::string artifact_version;
  std::string created_utc;
  double wall_seconds = 0.0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, content hash
  std::vector<std::string> outputs;

  Json to_json() const;
};

std::string hex64(std::uint64_t v);
std::string utc_timestamp();
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
std::string file_checksum_hex(const std::string& path);

}  // namespace pf
