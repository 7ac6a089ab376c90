#include "core/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "core/error.hpp"
#include "core/math_util.hpp"

namespace pf {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_num(const std::string& key, const std::string& v) {
  const char* begin = v.c_str();
  char* end = nullptr;
  double out = std::strtod(begin, &end);
  require(end != begin && trim(end) == "", Errc::invalid_argument,
          "parameter '" + key + "' is not a number: '" + v + "'");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double ExperimentConfig::num(const std::string& key, double fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : parse_num(key, it->second);
}

double ExperimentConfig::num(const std::string& key) const {
  auto it = params.find(key);
  require(it != params.end(), Errc::invalid_argument, "missing required parameter '" + key + "'");
  return parse_num(key, it->second);
}

std::int64_t ExperimentConfig::integer(const std::string& key, std::int64_t fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  double v = parse_num(key, it->second);
  auto n = static_cast<std::int64_t>(std::llround(v));
  require(static_cast<double>(n) == v, Errc::invalid_argument,
          "parameter '" + key + "' must be an integer: '" + it->second + "'");
  return n;
}

std::string ExperimentConfig::str(const std::string& key, const std::string& fallback) const {
  auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

bool ExperimentConfig::flag(const std::string& key, bool fallback) const {
  auto it = params.find(key);
  if (it == params.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  fail(Errc::invalid_argument, "parameter '" + key + "' is not a boolean: '" + v + "'");
}

std::vector<double> ExperimentConfig::num_list(const std::string& key) const {
  std::vector<double> out;
  auto it = params.find(key);
  if (it == params.end()) return out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_num(key, item));
  }
  return out;
}

std::vector<std::int64_t> ExperimentConfig::int_list(const std::string& key) const {
  std::vector<std::int64_t> out;
  for (double v : num_list(key)) {
    auto n = static_cast<std::int64_t>(std::llround(v));
    require(static_cast<double>(n) == v, Errc::invalid_argument,
            "parameter '" + key + "' must list integers");
    out.push_back(n);
  }
  return out;
}

void ExperimentConfig::set_int(const std::string& key, std::int64_t value) {
  params[key] = std::to_string(value);
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  os << "[run]\n";
  os << "module = " << module << "\n";
  os << "operation = " << operation << "\n";
  os << "output_dir = " << output_dir << "\n";
  os << "\n[params]\n";
  for (const auto& [k, v] : params) os << k << " = " << v << "\n";
  return os.str();
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json j;
  j["module"] = module;
  j["operation"] = operation;
  j["output_dir"] = output_dir;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (const auto& [k, v] : params) p[k] = v;
  j["params"] = p;
  return j.dump(2) + "\n";
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', Errc::invalid_argument,
              "config line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      require(section == "run" || section == "params", Errc::invalid_argument,
              "config line " + std::to_string(lineno) + ": unknown section '" + section + "'");
      continue;
    }
    std::size_t eq = line.find('=');
    require(eq != std::string::npos, Errc::invalid_argument,
            "config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), Errc::invalid_argument,
            "config line " + std::to_string(lineno) + ": empty key");
    if (section == "run" || section.empty()) {
      if (key == "module")
        cfg.module = value;
      else if (key == "operation")
        cfg.operation = value;
      else if (key == "output_dir")
        cfg.output_dir = value;
      else if (section == "run")
        fail(Errc::invalid_argument,
             "config line " + std::to_string(lineno) + ": unknown run key '" + key + "'");
      else
        cfg.params[key] = value;
    } else {
      cfg.params[key] = value;
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    fail(Errc::invalid_argument, std::string("config JSON parse error: ") + e.what());
  }
  require(j.is_object(), Errc::invalid_argument, "config JSON must be an object");
  ExperimentConfig cfg;
  for (const auto& [key, value] : j.items()) {
    if (key == "module" || key == "operation" || key == "output_dir") {
      require(value.is_string(), Errc::invalid_argument, "config key '" + key + "' must be a string");
      (key == "module" ? cfg.module : key == "operation" ? cfg.operation : cfg.output_dir) =
          value.get<std::string>();
    } else if (key == "params") {
      require(value.is_object(), Errc::invalid_argument, "config 'params' must be an object");
      for (const auto& [pk, pv] : value.items()) {
        if (pv.is_string())
          cfg.params[pk] = pv.get<std::string>();
        else
          cfg.params[pk] = pv.dump();
      }
    } else {
      fail(Errc::invalid_argument, "unknown config key '" + key + "'");
    }
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream is(path);
  require(is.good(), Errc::io, "cannot open config '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  bool json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  return json ? parse_json(ss.str()) : parse_text(ss.str());
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(serialize()); }

std::string ExperimentConfig::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

}  // namespace pf
