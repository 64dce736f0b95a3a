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

#include "harness/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace magnus {

namespace {

double sorted_sum(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

std::vector<RmsePoint> bucketed_rmse(std::vector<std::pair<double, double>> finish_and_sq,
                                     double period_s) {
  if (!(period_s > 0)) throw ContractViolation("RMSE window period must be positive");
  std::map<int64_t, std::vector<double>> buckets;
  for (const auto& [finish, sq] : finish_and_sq) {
    buckets[static_cast<int64_t>(std::floor(finish / period_s))].push_back(sq);
  }
  std::vector<RmsePoint> out;
  for (auto& [index, squares] : buckets) {
    const double n = static_cast<double>(squares.size());
    out.push_back({static_cast<double>(index + 1) * period_s, squares.size(),
                   std::sqrt(sorted_sum(squares) / n)});
  }
  return out;
}

}  // namespace

double nearest_rank(std::vector<double> values, double q) {
  if (values.empty()) throw ContractViolation("percentile of an empty set");
  if (!(q > 0.0 && q <= 1.0)) throw ContractViolation("percentile must be in (0, 1]");
  std::sort(values.begin(), values.end());
  auto rank = static_cast<size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<size_t>(rank, 1, values.size());
  return values[rank - 1];
}

MetricsReport compute_metrics(std::span<const RequestRecord> records, double horizon_s) {
  if (records.empty()) throw ContractViolation("no completed requests to measure");
  if (!(horizon_s > 0)) throw ContractViolation("metrics horizon must be positive");
  MetricsReport m;
  m.n_completed = records.size();
  m.horizon_s = horizon_s;
  std::vector<double> response;
  response.reserve(records.size());
  for (const auto& r : records) {
    m.valid_tokens += r.valid_tokens;
    m.invalid_tokens += r.invalid_tokens;
    response.push_back(r.finish_s - r.arrival_s);
  }
  const double n = static_cast<double>(records.size());
  m.request_throughput = n / horizon_s;
  m.token_throughput = static_cast<double>(m.valid_tokens + m.invalid_tokens) / horizon_s;
  m.valid_token_throughput = static_cast<double>(m.valid_tokens) / horizon_s;
  m.avg_response_time_s = sorted_sum(response) / n;
  m.p95_response_time_s = nearest_rank(std::move(response), 0.95);
  return m;
}

std::vector<RmsePoint> predictor_rmse_series(std::span<const RequestRecord> records,
                                             double period_s) {
  std::vector<std::pair<double, double>> points;
  for (const auto& r : records) {
    if (r.predicted_gen_len <= 0) continue;
    const double e = static_cast<double>(r.predicted_gen_len - r.actual_gen_len);
    points.emplace_back(r.finish_s, e * e);
  }
  return bucketed_rmse(std::move(points), period_s);
}

std::vector<RmsePoint> estimator_rmse_series(std::span<const BatchRecord> batches,
                                             double period_s) {
  std::vector<std::pair<double, double>> points;
  for (const auto& b : batches) {
    if (b.estimated_time_s < 0) continue;
    const double e = b.estimated_time_s - b.actual_time_s;
    points.emplace_back(b.finish_s, e * e);
  }
  return bucketed_rmse(std::move(points), period_s);
}

MetricsReport summarize(const SimResult& result, double rate) {
  if (result.requests.empty()) throw ContractViolation("run completed no requests");
  double first = std::numeric_limits<double>::infinity();
  double last = -std::numeric_limits<double>::infinity();
  for (const auto& r : result.requests) {
    first = std::min(first, r.arrival_s);
    last = std::max(last, r.finish_s);
  }
  MetricsReport m = compute_metrics(result.requests, last - first);
  m.policy = std::string(to_string(result.config.policy));
  m.instances = result.config.instances;
  m.rate = rate;
  m.seed = result.config.seed;
  m.n_requests = result.n_requests;
  m.n_rejected = result.rejections.size();
  m.n_batches = result.batches.size();
  m.oom_events = result.ooms.size();
  m.retrain_events = result.retrains.size();
  m.hrrn_fallbacks = result.hrrn_fallbacks;
  const double span = std::max(result.end_s, last) - first;
  for (double busy : result.instance_busy_s) m.utilization.push_back(busy / span);
  m.predictor_rmse =
      predictor_rmse_series(result.requests, result.config.predictor_retrain_period_s);
  m.estimator_rmse =
      estimator_rmse_series(result.batches, result.config.estimator_retrain_period_s);
  return m;
}

namespace {

nlohmann::ordered_json series_to_json(const std::vector<RmsePoint>& series) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& p : series) {
    out.push_back({{"window_end_s", p.window_end_s}, {"samples", p.samples}, {"rmse", p.rmse}});
  }
  return out;
}

std::vector<RmsePoint> series_from_json(const nlohmann::json& j) {
  std::vector<RmsePoint> out;
  for (const auto& p : j) {
    out.push_back({p.at("window_end_s").get<double>(), p.at("samples").get<size_t>(),
                   p.at("rmse").get<double>()});
  }
  return out;
}

}  // namespace

nlohmann::ordered_json metrics_to_json(const MetricsReport& m) {
  nlohmann::ordered_json j;
  j["policy"] = m.policy;
  j["instances"] = m.instances;
  j["rate"] = m.rate;
  j["seed"] = m.seed;
  j["n_requests"] = m.n_requests;
  j["n_completed"] = m.n_completed;
  j["n_rejected"] = m.n_rejected;
  j["n_batches"] = m.n_batches;
  j["valid_tokens"] = m.valid_tokens;
  j["invalid_tokens"] = m.invalid_tokens;
  j["horizon_s"] = m.horizon_s;
  j["request_throughput"] = m.request_throughput;
  j["token_throughput"] = m.token_throughput;
  j["valid_token_throughput"] = m.valid_token_throughput;
  j["avg_response_time_s"] = m.avg_response_time_s;
  j["p95_response_time_s"] = m.p95_response_time_s;
  j["oom_events"] = m.oom_events;
  j["retrain_events"] = m.retrain_events;
  j["hrrn_fallbacks"] = m.hrrn_fallbacks;
  j["utilization"] = m.utilization;
  j["predictor_rmse"] = series_to_json(m.predictor_rmse);
  j["estimator_rmse"] = series_to_json(m.estimator_rmse);
  return j;
}

MetricsReport metrics_from_json(const nlohmann::json& j) {
  MetricsReport m;
  try {
    m.policy = j.at("policy").get<std::string>();
    m.instances = j.at("instances").get<int>();
    m.rate = j.value("rate", 0.0);
    m.seed = j.value("seed", uint64_t{0});
    m.n_requests = j.at("n_requests").get<size_t>();
    m.n_completed = j.at("n_completed").get<size_t>();
    m.n_rejected = j.value("n_rejected", size_t{0});
    m.n_batches = j.value("n_batches", size_t{0});
    m.valid_tokens = j.value("valid_tokens", TokenCount{0});
    m.invalid_tokens = j.value("invalid_tokens", TokenCount{0});
    m.horizon_s = j.at("horizon_s").get<double>();
    m.request_throughput = j.at("request_throughput").get<double>();
    m.token_throughput = j.at("token_throughput").get<double>();
    m.valid_token_throughput = j.at("valid_token_throughput").get<double>();
    m.avg_response_time_s = j.at("avg_response_time_s").get<double>();
    m.p95_response_time_s = j.at("p95_response_time_s").get<double>();
    m.oom_events = j.value("oom_events", size_t{0});
    m.retrain_events = j.value("retrain_events", size_t{0});
    m.hrrn_fallbacks = j.value("hrrn_fallbacks", int64_t{0});
    m.utilization = j.value("utilization", std::vector<double>{});
    if (j.contains("predictor_rmse")) m.predictor_rmse = series_from_json(j["predictor_rmse"]);
    if (j.contains("estimator_rmse")) m.estimator_rmse = series_from_json(j["estimator_rmse"]);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid metrics file: ") + e.what());
  }
  return m;
}

}  // namespace magnus
