#include "parflow/parflow.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "core/config.hpp"
#include "core/error.hpp"
#include "core/grid.hpp"
#include "core/parallel.hpp"
#include "core/report.hpp"
#include "core/runner.hpp"
#include "core/suite.hpp"
#include "core/version.hpp"

namespace {

thread_local std::string g_last_error;

parflow_status status_from(const pf::Error& e) {
  switch (e.code()) {
    case pf::Errc::invalid_argument:
      return PARFLOW_ERR_INVALID_ARGUMENT;
    case pf::Errc::io:
      return PARFLOW_ERR_IO;
    case pf::Errc::numeric:
      return PARFLOW_ERR_NUMERIC;
    default:
      return PARFLOW_ERR_INTERNAL;
  }
}

/// Runs fn, translating exceptions into status codes + the thread-local
/// message. fn returning normally means PARFLOW_OK.
template <typename Fn>
parflow_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return PARFLOW_OK;
  } catch (const pf::Error& e) {
    g_last_error = e.what();
    return status_from(e);
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return PARFLOW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return PARFLOW_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return PARFLOW_ERR_INTERNAL;
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

pf::ExperimentConfig& unwrap(parflow_config* cfg) {
  return *reinterpret_cast<pf::ExperimentConfig*>(cfg);
}
const pf::ExperimentConfig& unwrap(const parflow_config* cfg) {
  return *reinterpret_cast<const pf::ExperimentConfig*>(cfg);
}

void require_arg(bool ok, const char* msg) {
  if (!ok) pf::fail(pf::Errc::invalid_argument, msg);
}

}  // namespace

extern "C" {

const char* parflow_version(void) { return pf::kVersion; }

const char* parflow_last_error(void) { return g_last_error.c_str(); }

parflow_config* parflow_config_create(void) {
  return reinterpret_cast<parflow_config*>(new (std::nothrow) pf::ExperimentConfig());
}

void parflow_config_free(parflow_config* cfg) {
  delete reinterpret_cast<pf::ExperimentConfig*>(cfg);
}

parflow_status parflow_config_parse(parflow_config* cfg, const char* text, int is_json) {
  return guarded([&] {
    require_arg(cfg && text, "config and text must not be null");
    unwrap(cfg) = is_json ? pf::ExperimentConfig::parse_json(text)
                          : pf::ExperimentConfig::parse_text(text);
  });
}

parflow_status parflow_config_load(parflow_config* cfg, const char* path) {
  return guarded([&] {
    require_arg(cfg && path, "config and path must not be null");
    unwrap(cfg) = pf::ExperimentConfig::load(path);
  });
}

parflow_status parflow_config_set(parflow_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require_arg(cfg && key && value, "config, key and value must not be null");
    pf::ExperimentConfig& c = unwrap(cfg);
    std::string k = key;
    if (k == "module")
      c.module = value;
    else if (k == "operation")
      c.operation = value;
    else if (k == "output_dir")
      c.output_dir = value;
    else
      c.set(k, value);
  });
}

parflow_status parflow_config_get(const parflow_config* cfg, const char* key, char* buf,
                                  size_t buf_len) {
  return guarded([&] {
    require_arg(cfg && key && buf, "config, key and buffer must not be null");
    const pf::ExperimentConfig& c = unwrap(cfg);
    std::string k = key, v;
    if (k == "module")
      v = c.module;
    else if (k == "operation")
      v = c.operation;
    else if (k == "output_dir")
      v = c.output_dir;
    else {
      require_arg(c.has(k), "unknown config key");
      v = c.str(k);
    }
    require_arg(buf_len > v.size(), "buffer too small");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

parflow_status parflow_config_serialize(const parflow_config* cfg, int as_json, char** out) {
  return guarded([&] {
    require_arg(cfg && out, "config and out must not be null");
    const pf::ExperimentConfig& c = unwrap(cfg);
    *out = dup_string(as_json ? c.to_json() : c.serialize());
  });
}

parflow_status parflow_config_hash(const parflow_config* cfg, uint64_t* out) {
  return guarded([&] {
    require_arg(cfg && out, "config and out must not be null");
    *out = unwrap(cfg).hash();
  });
}

void parflow_string_free(char* s) { std::free(s); }

parflow_status parflow_run(const parflow_config* cfg, char** report_json_out, int* pass_out) {
  return guarded([&] {
    require_arg(cfg != nullptr, "config must not be null");
    pf::RunOutput result;
    pf::run_to_dir(unwrap(cfg), &result);
    if (report_json_out) *report_json_out = dup_string(result.report.dump(2) + "\n");
    if (pass_out) *pass_out = result.pass ? 1 : 0;
  });
}

parflow_status parflow_suite(const char* preset, const char* out_dir, char** summary_json_out,
                             int* all_pass_out) {
  return guarded([&] {
    require_arg(preset != nullptr, "preset must not be null");
    pf::SuiteResult res = pf::run_suite(preset, out_dir ? out_dir : "");
    if (summary_json_out) *summary_json_out = dup_string(res.to_json().dump(2) + "\n");
    if (all_pass_out) *all_pass_out = res.all_pass ? 1 : 0;
  });
}

parflow_status parflow_suite_presets(char** csv_out) {
  return guarded([&] {
    require_arg(csv_out != nullptr, "out must not be null");
    std::string joined;
    for (const std::string& p : pf::suite_presets()) {
      if (!joined.empty()) joined += ",";
      joined += p;
    }
    *csv_out = dup_string(joined);
  });
}

parflow_status parflow_field_info(const char* path, char** info_json_out) {
  return guarded([&] {
    require_arg(path && info_json_out, "path and out must not be null");
    std::vector<pf::GridField::Chunk> chunks;
    pf::GridField f = pf::GridField::load(path, &chunks);
    pf::Json j;
    j["d"] = f.grid.d;
    j["nt"] = f.grid.nt;
    j["nx"] = f.grid.nx;
    j["t0"] = f.grid.t0;
    j["dt"] = f.grid.dt;
    j["dx"] = f.grid.dx;
    j["x0"] = f.grid.x0;
    j["components"] = f.components;
    j["values"] = f.value_count();
    pf::Json ch = pf::Json::array();
    for (const auto& [tag, bytes] : chunks) {
      pf::Json e;
      e["tag"] = tag;
      e["bytes"] = bytes.size();
      ch.push_back(std::move(e));
    }
    j["chunks"] = std::move(ch);
    *info_json_out = dup_string(j.dump(2) + "\n");
  });
}

void parflow_set_thread_cap(int n) { pf::set_thread_cap(n); }

}  // extern "C"
