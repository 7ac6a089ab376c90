#include "core/report.hpp"

#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "core/error.hpp"
#include "core/math_util.hpp"
#include "core/version.hpp"

namespace pf {

void Csv::add_row(std::vector<std::string> cells) {
  require(cells.size() == header.size(), Errc::internal, "CSV row width mismatch");
  rows.push_back(std::move(cells));
}

std::string Csv::serialize() const {
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      require(cells[i].find_first_of(",\n\"") == std::string::npos, Errc::internal,
              "CSV cell contains a delimiter");
      if (i) os << ',';
      os << cells[i];
    }
    os << '\n';
  };
  emit(header);
  for (const auto& row : rows) emit(row);
  return os.str();
}

Json base_report(const ExperimentConfig& cfg) {
  Json j;
  j["module"] = cfg.module;
  j["operation"] = cfg.operation;
  j["config_hash"] = cfg.hash_hex();
  j["artifact_version"] = kVersion;
  return j;
}

Json RunManifest::to_json() const {
  Json j;
  j["config_hash"] = config_hash;
  j["artifact_version"] = artifact_version;
  j["created_utc"] = created_utc;
  j["wall_seconds"] = wall_seconds;
  Json in = Json::array();
  for (const auto& [path, sum] : inputs) in.push_back(Json{{"path", path}, {"checksum", sum}});
  j["inputs"] = in;
  j["outputs"] = outputs;
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  require(is.good(), Errc::io, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(os.good(), Errc::io, "cannot open '" + path + "' for writing");
  os << content;
  require(os.good(), Errc::io, "write failed for '" + path + "'");
}

std::string file_checksum_hex(const std::string& path) {
  return hex64(fnv1a64(read_text_file(path)));
}

}  // namespace pf
