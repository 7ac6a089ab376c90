#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pf {

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// One fully specified run: module + operation selector, parameter table,
/// output directory. Values are kept as the strings the user wrote, so a
/// parse/serialize round trip is lossless; serialization is canonical
/// (fixed section order, sorted parameter keys), so equal configs serialize
/// and hash identically.
struct ExperimentConfig {
  std::string module;
  std::string operation;
  std::string output_dir;
  std::map<std::string, std::string> params;

  bool has(const std::string& key) const { return params.count(key) != 0; }
  double num(const std::string& key, double fallback) const;
  double num(const std::string& key) const;  // missing key is an error
  std::int64_t integer(const std::string& key, std::int64_t fallback) const;
  std::string str(const std::string& key, const std::string& fallback = "") const;
  bool flag(const std::string& key, bool fallback = false) const;
  std::vector<double> num_list(const std::string& key) const;  // comma separated
  std::vector<std::int64_t> int_list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { params[key] = value; }
  void set_num(const std::string& key, double value) { params[key] = format_double(value); }
  void set_int(const std::string& key, std::int64_t value);

  /// Canonical key = value text with [run] and [params] sections.
  std::string serialize() const;
  std::string to_json() const;
  static ExperimentConfig parse_text(const std::string& text);
  static ExperimentConfig parse_json(const std::string& text);
  /// Reads a config file; ".json" selects the JSON form, anything else text.
  static ExperimentConfig load(const std::string& path);

  /// FNV-1a of the canonical serialization.
  std::uint64_t hash() const;
  std::string hash_hex() const;
};

}  // namespace pf
