#ifndef PARFLOW_H
#define PARFLOW_H

/* C interface to the parabolic-flow verification library. All entry points
 * return a parflow_status; on failure parflow_last_error() carries a
 * human-readable message for the calling thread. Strings returned through
 * char** out-parameters are heap-allocated and must be released with
 * parflow_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum parflow_status {
  PARFLOW_OK = 0,
  PARFLOW_ERR_INVALID_ARGUMENT = 1,
  PARFLOW_ERR_IO = 2,
  PARFLOW_ERR_NUMERIC = 3,
  PARFLOW_ERR_INTERNAL = 4
} parflow_status;

/* Library version ("major.minor.patch"); stable static string. */
const char* parflow_version(void);

/* Message of the most recent failure on this thread; "" when none. The
 * pointer stays valid until the next failing call on the same thread. */
const char* parflow_last_error(void);

/* ------------------------------------------------------------------ */
/* Experiment configuration (opaque)                                   */

typedef struct parflow_config parflow_config;

parflow_config* parflow_config_create(void);
void parflow_config_free(parflow_config* cfg);

/* Replaces cfg with the parsed text: canonical "[run]/[params]" key = value
 * sections when is_json is 0, the JSON form otherwise. */
parflow_status parflow_config_parse(parflow_config* cfg, const char* text, int is_json);

/* Loads a config file; ".json" selects the JSON reader. */
parflow_status parflow_config_load(parflow_config* cfg, const char* path);

/* "module", "operation" and "output_dir" address the run section; every other
 * key is an experiment parameter stored verbatim. */
parflow_status parflow_config_set(parflow_config* cfg, const char* key, const char* value);

/* Copies the value of a key (run section or parameter) into buf. Fails with
 * PARFLOW_ERR_INVALID_ARGUMENT when the key is absent or buf is too small. */
parflow_status parflow_config_get(const parflow_config* cfg, const char* key, char* buf,
                                  size_t buf_len);

/* Canonical serialization (text or JSON). */
parflow_status parflow_config_serialize(const parflow_config* cfg, int as_json, char** out);

/* FNV-1a hash of the canonical serialization; identical configs hash equal. */
parflow_status parflow_config_hash(const parflow_config* cfg, uint64_t* out);

void parflow_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Execution                                                           */

/* Runs the configured experiment and writes report.json, tables, plots,
 * field containers and manifest.json under the configured output directory.
 * report_json_out (optional) receives the report; pass_out (optional)
 * receives 1 when every gate in the report passed. */
parflow_status parflow_run(const parflow_config* cfg, char** report_json_out, int* pass_out);

/* Runs a suite preset. out_dir may be NULL/empty to keep results in memory.
 * summary_json_out (optional) receives {preset, all_pass, steps[]}. */
parflow_status parflow_suite(const char* preset, const char* out_dir, char** summary_json_out,
                             int* all_pass_out);

/* Comma-separated names of the available suite presets. */
parflow_status parflow_suite_presets(char** csv_out);

/* Header and chunk inventory of a stored field container, as JSON. */
parflow_status parflow_field_info(const char* path, char** info_json_out);

/* Caps worker threads for subsequent calls; n <= 0 restores the
 * PARFLOW_THREADS / hardware default. */
void parflow_set_thread_cap(int n);

#ifdef __cplusplus
}
#endif

#endif /* PARFLOW_H */
