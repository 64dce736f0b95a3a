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

#include "magnus/magnus.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "core/types.h"
#include "harness/log_store.h"
#include "harness/metrics.h"
#include "harness/report.h"
#include "predictor/embedding.h"
#include "predictor/genlen_predictor.h"
#include "sim/engine.h"
#include "workload/workload.h"

struct magnus_trace {
  magnus::Trace trace;
};

struct magnus_profile {
  magnus::LlmProfile profile;
};

struct magnus_predictor {
  std::shared_ptr<const magnus::GenLenPredictor> model;
};

struct magnus_report {
  magnus::SimResult result;
  magnus::LlmProfile profile;
  magnus::MetricsReport metrics;
};

namespace {

thread_local std::string g_last_error;

magnus_status fail(magnus_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename F>
magnus_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return MAGNUS_OK;
  } catch (const magnus::ConfigError& e) {
    return fail(MAGNUS_CONFIG_ERROR, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(MAGNUS_CONFIG_ERROR, e.what());
  } catch (const magnus::ContractViolation& e) {
    return fail(MAGNUS_INVALID_ARGUMENT, e.what());
  } catch (const std::exception& e) {
    return fail(MAGNUS_RUNTIME_ERROR, e.what());
  } catch (...) {
    return fail(MAGNUS_RUNTIME_ERROR, "unknown error");
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw magnus::ContractViolation(what);
}

nlohmann::json parse_optional(const char* text) {
  if (text == nullptr || *text == '\0') return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(text);
    if (!j.is_object()) throw magnus::ConfigError("expected a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw magnus::ConfigError(std::string("malformed JSON: ") + e.what());
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::shared_ptr<const magnus::EmbeddingProvider> embedder_from(const nlohmann::json& j) {
  if (!j.contains("embedding_service")) return nullptr;
  const auto& svc = j.at("embedding_service");
  return std::make_shared<magnus::HttpEmbedder>(
      svc.at("host").get<std::string>(), svc.at("port").get<int>(),
      std::chrono::milliseconds(svc.value("timeout_ms", 2000)));
}

}  // namespace

extern "C" {

const char* magnus_version(void) { return "0.1.0"; }

const char* magnus_last_error(void) { return g_last_error.c_str(); }

void magnus_string_free(char* s) { std::free(s); }

magnus_status magnus_trace_generate(const char* workload_json, uint64_t seed,
                                    magnus_trace_t** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    auto config = magnus::parse_workload_config(parse_optional(workload_json));
    *out = new magnus_trace{magnus::gen_trace(config, seed)};
  });
}

magnus_status magnus_trace_corpus(const char* workload_json, int64_t per_task, uint64_t seed,
                                  magnus_trace_t** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    require(per_task >= 1, "per_task must be >= 1");
    auto config = magnus::parse_workload_config(parse_optional(workload_json));
    *out = new magnus_trace{
        magnus::gen_task_corpus(config.tasks, per_task, config.l_max, config.g_max, seed)};
  });
}

magnus_status magnus_trace_load(const char* path, magnus_trace_t** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new magnus_trace{magnus::load_trace(path)};
  });
}

magnus_status magnus_trace_save(const magnus_trace_t* trace, const char* path) {
  return guarded([&] {
    require(trace != nullptr && path != nullptr, "null argument");
    magnus::save_trace(trace->trace, path);
  });
}

magnus_status magnus_trace_to_jsonl(const magnus_trace_t* trace, char** out) {
  return guarded([&] {
    require(trace != nullptr && out != nullptr, "null argument");
    *out = dup_string(magnus::trace_to_jsonl(trace->trace));
  });
}

size_t magnus_trace_size(const magnus_trace_t* trace) {
  return trace == nullptr ? 0 : trace->trace.size();
}

magnus_status magnus_trace_split(const magnus_trace_t* trace, size_t train_per_task,
                                 size_t test_per_task, uint64_t seed, magnus_trace_t** train,
                                 magnus_trace_t** test) {
  return guarded([&] {
    require(trace != nullptr && train != nullptr && test != nullptr, "null argument");
    auto [a, b] = magnus::split_trace(trace->trace, train_per_task, test_per_task, seed);
    auto first = std::make_unique<magnus_trace>(magnus_trace{std::move(a)});
    *test = new magnus_trace{std::move(b)};
    *train = first.release();
  });
}

void magnus_trace_free(magnus_trace_t* trace) { delete trace; }

magnus_status magnus_profile_default(magnus_profile_t** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    *out = new magnus_profile{};
  });
}

magnus_status magnus_profile_from_json(const char* json, magnus_profile_t** out) {
  return guarded([&] {
    require(out != nullptr, "null output handle");
    auto profile = parse_optional(json).get<magnus::LlmProfile>();
    profile.validate();
    *out = new magnus_profile{profile};
  });
}

magnus_status magnus_profile_load(const char* path, magnus_profile_t** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    *out = new magnus_profile{magnus::load_profile(path)};
  });
}

magnus_status magnus_profile_static_batch_size(const magnus_profile_t* profile,
                                               int64_t* out) {
  return guarded([&] {
    require(profile != nullptr && out != nullptr, "null argument");
    *out = magnus::static_batch_size(profile->profile);
  });
}

void magnus_profile_free(magnus_profile_t* profile) { delete profile; }

magnus_status magnus_predictor_train(const magnus_trace_t* train, const char* options_json,
                                     magnus_predictor_t** out) {
  return guarded([&] {
    require(train != nullptr && out != nullptr, "null argument");
    const auto j = parse_optional(options_json);
    magnus::PredictorOptions options;
    options.seed = j.value("seed", uint64_t{0});
    options.g_max = j.value("g_max", options.g_max);
    options.forest.n_trees = j.value("trees", options.forest.n_trees);
    options.forest.max_depth = j.value("max_depth", options.forest.max_depth);
    options.forest.min_leaf = j.value("min_leaf", options.forest.min_leaf);
    if (options.forest.n_trees < 1 || options.forest.max_depth < 1 ||
        options.forest.min_leaf < 1) {
      throw magnus::ConfigError("forest hyper-parameters must be >= 1");
    }
    const auto mode = magnus::parse_predictor_mode(j.value("mode", std::string("USIN")));
    auto model = magnus::GenLenPredictor::train(train->trace, mode, options, embedder_from(j));
    *out = new magnus_predictor{
        std::make_shared<const magnus::GenLenPredictor>(std::move(model))};
  });
}

magnus_status magnus_predictor_load(const char* path, const char* options_json,
                                    magnus_predictor_t** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto model = magnus::load_predictor(path);
    if (auto embedder = embedder_from(parse_optional(options_json))) {
      model.set_embedder(std::move(embedder));
    }
    *out = new magnus_predictor{
        std::make_shared<const magnus::GenLenPredictor>(std::move(model))};
  });
}

magnus_status magnus_predictor_save(const magnus_predictor_t* predictor, const char* path) {
  return guarded([&] {
    require(predictor != nullptr && path != nullptr, "null argument");
    magnus::save_predictor(*predictor->model, path);
  });
}

const char* magnus_predictor_mode(const magnus_predictor_t* predictor) {
  if (predictor == nullptr) return "";
  return magnus::to_string(predictor->model->mode()).data();
}

magnus_status magnus_predictor_rmse(const magnus_predictor_t* predictor,
                                    const magnus_trace_t* testset, double* out) {
  return guarded([&] {
    require(predictor != nullptr && testset != nullptr && out != nullptr, "null argument");
    *out = magnus::rmse(*predictor->model, testset->trace);
  });
}

magnus_status magnus_predictor_predict(const magnus_predictor_t* predictor,
                                       const magnus_trace_t* trace, int64_t* out, size_t n) {
  return guarded([&] {
    require(predictor != nullptr && trace != nullptr, "null argument");
    require(n == trace->trace.size(), "output length differs from trace size");
    require(n == 0 || out != nullptr, "null output buffer");
    for (size_t i = 0; i < n; ++i) out[i] = predictor->model->predict(trace->trace[i]);
  });
}

void magnus_predictor_free(magnus_predictor_t* predictor) { delete predictor; }

magnus_status magnus_simulate(const magnus_trace_t* trace, const magnus_profile_t* profile,
                              const magnus_predictor_t* predictor,
                              const char* sim_config_json, magnus_report_t** out) {
  return guarded([&] {
    require(trace != nullptr && out != nullptr, "null argument");
    const auto j = parse_optional(sim_config_json);
    magnus::SimConfig config;
    magnus::LlmProfile prof = profile != nullptr ? profile->profile : magnus::LlmProfile{};
    magnus::apply_sim_config(j, config, prof);
    if (predictor != nullptr && magnus::uses_predictor(config.policy)) {
      config.predictor_mode = predictor->model->mode();
    }
    const double rate = j.value("rate", 0.0);
    magnus::Simulator sim(config, prof,
                          predictor != nullptr ? predictor->model : nullptr);
    auto report = std::make_unique<magnus_report>();
    report->result = sim.run(trace->trace);
    report->profile = prof;
    report->metrics = magnus::summarize(report->result, rate);
    *out = report.release();
  });
}

magnus_status magnus_report_metrics_json(const magnus_report_t* report, char** out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "null argument");
    *out = dup_string(magnus::metrics_to_json(report->metrics).dump(2) + "\n");
  });
}

magnus_status magnus_report_log_jsonl(const magnus_report_t* report, char** out) {
  return guarded([&] {
    require(report != nullptr && out != nullptr, "null argument");
    *out = dup_string(magnus::run_log_to_jsonl(report->result, report->profile));
  });
}

magnus_status magnus_report_write(const magnus_report_t* report, const char* metrics_path,
                                  const char* log_dir) {
  return guarded([&] {
    require(report != nullptr, "null report");
    if (metrics_path != nullptr) {
      std::ofstream f(metrics_path, std::ios::binary | std::ios::trunc);
      if (!f) throw std::runtime_error(std::string("cannot write ") + metrics_path);
      f << magnus::metrics_to_json(report->metrics).dump(2) << '\n';
    }
    if (log_dir != nullptr) magnus::write_run_log(log_dir, report->result, report->profile);
  });
}

void magnus_report_free(magnus_report_t* report) { delete report; }

magnus_status magnus_metrics_csv(const char* const* metrics_paths, size_t n, char** out) {
  return guarded([&] {
    require(out != nullptr && (n == 0 || metrics_paths != nullptr), "null argument");
    std::vector<magnus::MetricsReport> reports;
    for (size_t i = 0; i < n; ++i) {
      std::ifstream f(metrics_paths[i]);
      if (!f) throw magnus::ConfigError(std::string("cannot open metrics ") + metrics_paths[i]);
      nlohmann::json j;
      try {
        f >> j;
      } catch (const nlohmann::json::exception& e) {
        throw magnus::ConfigError(std::string(metrics_paths[i]) + ": " + e.what());
      }
      reports.push_back(magnus::metrics_from_json(j));
    }
    *out = dup_string(magnus::report_csv(reports));
  });
}

}  // extern "C"
