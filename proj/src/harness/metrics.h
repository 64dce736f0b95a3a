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

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sim/engine.h"

namespace magnus {

struct RmsePoint {
  double window_end_s = 0.0;
  size_t samples = 0;
  double rmse = 0.0;
};

struct MetricsReport {
  std::string policy;
  int instances = 0;
  double rate = 0.0;  // offered load, req/s; 0 when unknown
  uint64_t seed = 0;

  size_t n_requests = 0;
  size_t n_completed = 0;
  size_t n_rejected = 0;
  size_t n_batches = 0;
  TokenCount valid_tokens = 0;
  TokenCount invalid_tokens = 0;

  double horizon_s = 0.0;
  double request_throughput = 0.0;
  double token_throughput = 0.0;  // invalid tokens included
  double valid_token_throughput = 0.0;
  double avg_response_time_s = 0.0;
  double p95_response_time_s = 0.0;

  size_t oom_events = 0;
  size_t retrain_events = 0;
  int64_t hrrn_fallbacks = 0;
  std::vector<double> utilization;

  std::vector<RmsePoint> predictor_rmse;
  std::vector<RmsePoint> estimator_rmse;
};

// Throughput and response-time metrics of completed requests over
// `horizon_s`. Throws ContractViolation on an empty record set or a
// non-positive horizon.
MetricsReport compute_metrics(std::span<const RequestRecord> records, double horizon_s);

// Nearest-rank percentile (q in (0, 1]) of unsorted values.
double nearest_rank(std::vector<double> values, double q);

// compute_metrics over a whole run with horizon = last finish - first
// arrival, plus run metadata and the RMSE time series.
MetricsReport summarize(const SimResult& result, double rate = 0.0);

// Prediction RMSE of requests (estimator RMSE of batches) grouped by the
// retrain period their completion falls into.
std::vector<RmsePoint> predictor_rmse_series(std::span<const RequestRecord> records,
                                             double period_s);
std::vector<RmsePoint> estimator_rmse_series(std::span<const BatchRecord> batches,
                                             double period_s);

nlohmann::ordered_json metrics_to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const nlohmann::json& j);

}  // namespace magnus
