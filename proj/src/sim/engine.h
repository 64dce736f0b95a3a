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

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "batcher/wma_batcher.h"
#include "core/types.h"
#include "estimator/knn_estimator.h"
#include "predictor/genlen_predictor.h"
#include "workload/workload.h"

namespace magnus {

// vs:     FCFS batches of the vanilla size, FIFO dispatch.
// ccb:    conservative continuous batching, capacity-limited, FIFO joins.
// glp:    WMA-directed batching capped at the vanilla size, FIFO dispatch.
// abp:    uncapped WMA-directed batching, FIFO dispatch.
// magnus: uncapped WMA-directed batching, HRRN dispatch, continuous learning.
enum class Policy { kVs, kCcb, kGlp, kAbp, kMagnus };

std::string_view to_string(Policy policy);
Policy parse_policy(std::string_view name);
bool uses_predictor(Policy policy);

struct SimConfig {
  Policy policy = Policy::kMagnus;
  int instances = 7;
  BatcherConfig batcher;
  int knn_k = 5;
  PredictorMode predictor_mode = PredictorMode::kUsin;
  double prediction_latency_s = 0.03;
  int64_t fixed_batch_size = 0;  // 0: derive from the profile
  int64_t ccb_capacity = 7;
  double predictor_retrain_period_s = 180.0;
  double estimator_retrain_period_s = 120.0;
  bool continuous_learning = true;  // only honoured by magnus
  uint64_t seed = 0;

  void validate() const;
};

struct RequestRecord {
  RequestId id = 0;
  std::string task_id;
  int instance = -1;
  BatchId batch_id = -1;  // -1 under ccb
  TokenCount user_input_len = 0;
  TokenCount request_len = 0;
  TokenCount predicted_gen_len = 0;  // 0 when the policy does not predict
  TokenCount actual_gen_len = 0;
  double arrival_s = 0.0;
  double start_s = 0.0;
  double finish_s = 0.0;
  TokenCount valid_tokens = 0;
  TokenCount invalid_tokens = 0;
};

struct BatchRecord {
  BatchId id = 0;
  int instance = 0;
  int64_t size = 0;
  TokenCount batch_len = 0;
  TokenCount predicted_gen_len = 0;
  TokenCount actual_gen_len = 0;
  double dispatch_s = 0.0;
  double finish_s = 0.0;
  double estimated_time_s = -1.0;  // -1 when no estimate was made
  double actual_time_s = 0.0;
  double response_ratio = -1.0;
  bool sealed_by_oom = false;
};

struct OomEvent {
  double time_s = 0.0;
  BatchId batch_id = 0;
  int instance = 0;
  int64_t size = 0;
  TokenCount fail_iteration = 0;
  BatchId first_id = -1;
  BatchId second_id = -1;
  int64_t first_size = 0;
  int64_t second_size = 0;
};

struct RetrainEvent {
  double time_s = 0.0;
  std::string kind;  // "predictor" or "estimator"
  size_t window_size = 0;
  std::vector<int64_t> collected;  // request ids, or batch ids
  size_t training_size = 0;
};

struct Rejection {
  RequestId id = 0;
  double time_s = 0.0;
  std::string reason;
};

struct SimResult {
  SimConfig config;
  size_t n_requests = 0;
  std::vector<RequestRecord> requests;  // in completion order
  std::vector<BatchRecord> batches;     // in completion order
  std::vector<OomEvent> ooms;
  std::vector<RetrainEvent> retrains;
  std::vector<Rejection> rejections;
  std::vector<double> instance_busy_s;
  double end_s = 0.0;  // when the last instance went idle
  int64_t hrrn_fallbacks = 0;
};

// Serving-time examples from a sweep of batch sizes {1,2,4,8,16} and a grid
// of batch lengths and generation lengths, priced by the cost model.
std::vector<TimedBatch> calibration_examples(const LlmProfile& profile);

// Deterministic discrete-event simulation of K instances serving a trace.
class Simulator {
 public:
  Simulator(SimConfig config, LlmProfile profile,
            std::shared_ptr<const GenLenPredictor> predictor = nullptr,
            std::optional<KnnEstimator> estimator = std::nullopt);

  SimResult run(const Trace& trace);

 private:
  SimConfig config_;
  LlmProfile profile_;
  std::shared_ptr<const GenLenPredictor> predictor_;
  std::optional<KnnEstimator> estimator_;
};

nlohmann::json sim_config_to_json(const SimConfig& config);
// Reads the simulation config JSON:
//   {policy, instances, profile, batcher:{phi, wait_bounds}, knn:{k},
//    predictor:{mode, seed, latency_s}, cost overrides, seed, ...}
// Fields absent from `j` keep the values already in `config`.
void apply_sim_config(const nlohmann::json& j, SimConfig& config, LlmProfile& profile);

}  // namespace magnus
