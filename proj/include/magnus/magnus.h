/* Copyright 2026 The Magnus Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MAGNUS_MAGNUS_H_
#define MAGNUS_MAGNUS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(MAGNUS_BUILDING_LIBRARY)
#define MAGNUS_API __attribute__((visibility("default")))
#else
#define MAGNUS_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum magnus_status {
  MAGNUS_OK = 0,
  MAGNUS_INVALID_ARGUMENT = 1,
  MAGNUS_CONFIG_ERROR = 2,
  MAGNUS_RUNTIME_ERROR = 3,
} magnus_status;

typedef struct magnus_trace magnus_trace_t;
typedef struct magnus_profile magnus_profile_t;
typedef struct magnus_predictor magnus_predictor_t;
typedef struct magnus_report magnus_report_t;

MAGNUS_API const char* magnus_version(void);

// Message of the last failed call on this thread, "" if none.
MAGNUS_API const char* magnus_last_error(void);

// Frees strings returned through char** out-parameters.
MAGNUS_API void magnus_string_free(char* s);

// ---- traces ---------------------------------------------------------------

// `workload_json` is a workload config object
//   {"rate": req/s, "n_requests": n, "l_max", "g_max", "tasks": [...]}
// Absent fields take defaults; NULL means all defaults.
MAGNUS_API magnus_status magnus_trace_generate(const char* workload_json, uint64_t seed,
                                               magnus_trace_t** out);
// Per-task sample corpus with `per_task` requests of each task, arrival 0.
MAGNUS_API magnus_status magnus_trace_corpus(const char* workload_json, int64_t per_task,
                                             uint64_t seed, magnus_trace_t** out);
MAGNUS_API magnus_status magnus_trace_load(const char* path, magnus_trace_t** out);
MAGNUS_API magnus_status magnus_trace_save(const magnus_trace_t* trace, const char* path);
MAGNUS_API magnus_status magnus_trace_to_jsonl(const magnus_trace_t* trace, char** out);
MAGNUS_API size_t magnus_trace_size(const magnus_trace_t* trace);
// Seeded per-task split into disjoint train and test traces.
MAGNUS_API magnus_status magnus_trace_split(const magnus_trace_t* trace, size_t train_per_task,
                                            size_t test_per_task, uint64_t seed,
                                            magnus_trace_t** train, magnus_trace_t** test);
MAGNUS_API void magnus_trace_free(magnus_trace_t* trace);

// ---- LLM profiles ---------------------------------------------------------

MAGNUS_API magnus_status magnus_profile_default(magnus_profile_t** out);
MAGNUS_API magnus_status magnus_profile_from_json(const char* json, magnus_profile_t** out);
MAGNUS_API magnus_status magnus_profile_load(const char* path, magnus_profile_t** out);
MAGNUS_API magnus_status magnus_profile_static_batch_size(const magnus_profile_t* profile,
                                                          int64_t* out);
MAGNUS_API void magnus_profile_free(magnus_profile_t* profile);

// ---- generation-length predictor -----------------------------------------

// `options_json`: {"mode": "UILO"|"RAFT"|"INST"|"USIN", "seed", "trees",
// "max_depth", "min_leaf", "g_max", "embedding_service": {"host", "port",
// "timeout_ms"}}. NULL means USIN with defaults.
MAGNUS_API magnus_status magnus_predictor_train(const magnus_trace_t* train,
                                                const char* options_json,
                                                magnus_predictor_t** out);
// `options_json` may carry "embedding_service"; NULL uses the local hasher.
MAGNUS_API magnus_status magnus_predictor_load(const char* path, const char* options_json,
                                               magnus_predictor_t** out);
MAGNUS_API magnus_status magnus_predictor_save(const magnus_predictor_t* predictor,
                                               const char* path);
MAGNUS_API const char* magnus_predictor_mode(const magnus_predictor_t* predictor);
MAGNUS_API magnus_status magnus_predictor_rmse(const magnus_predictor_t* predictor,
                                               const magnus_trace_t* testset, double* out);
// Writes one prediction per trace record into `out[0..n)`; n must equal the
// trace size.
MAGNUS_API magnus_status magnus_predictor_predict(const magnus_predictor_t* predictor,
                                                  const magnus_trace_t* trace, int64_t* out,
                                                  size_t n);
MAGNUS_API void magnus_predictor_free(magnus_predictor_t* predictor);

// ---- simulation -----------------------------------------------------------

// Runs one simulation. `predictor` may be NULL for vs, ccb and UILO-mode
// runs. `sim_config_json` may be NULL; it accepts {policy, instances,
// profile, batcher:{phi, wait_bounds}, knn:{k}, predictor:{mode, latency_s},
// cost:{a0, a1, b0, b1, reload_penalty}, fixed_batch_size, ccb_capacity,
// continuous_learning, retrain_period_s:{predictor, estimator}, seed, rate}.
MAGNUS_API magnus_status magnus_simulate(const magnus_trace_t* trace,
                                         const magnus_profile_t* profile,
                                         const magnus_predictor_t* predictor,
                                         const char* sim_config_json, magnus_report_t** out);
MAGNUS_API magnus_status magnus_report_metrics_json(const magnus_report_t* report, char** out);
MAGNUS_API magnus_status magnus_report_log_jsonl(const magnus_report_t* report, char** out);
// Writes the metrics file and/or the run log directory; either may be NULL.
MAGNUS_API magnus_status magnus_report_write(const magnus_report_t* report,
                                             const char* metrics_path, const char* log_dir);
MAGNUS_API void magnus_report_free(magnus_report_t* report);

// CSV with one row per metrics file, in argument order.
MAGNUS_API magnus_status magnus_metrics_csv(const char* const* metrics_paths, size_t n,
                                            char** out);

#ifdef __cplusplus
}  // extern "C"
#endif

#endif  // MAGNUS_MAGNUS_H_
