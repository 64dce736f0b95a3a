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

#include "estimator/knn_estimator.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace magnus {

bool needs_relearning_time(double estimated_s, double actual_s) {
  const double err = std::abs(estimated_s - actual_s);
  return err > kRelearnAbsSeconds && err > kRelearnRelativeTime * actual_s;
}

BatchFeatures features_of(const Batch& batch) {
  return {static_cast<double>(batch.size()), static_cast<double>(batch_length(batch)),
          static_cast<double>(batch_predicted_gen_len(batch))};
}

KnnEstimator::KnnEstimator(std::vector<TimedBatch> examples, int k)
    : examples_(std::move(examples)), k_(k) {
  if (k_ < 1) throw ConfigError("knn.k must be >= 1");
  refresh_stats();
}

void KnnEstimator::refresh_stats() {
  mean_ = {0.0, 0.0, 0.0};
  stddev_ = {1.0, 1.0, 1.0};
  if (examples_.empty()) return;
  const auto n = static_cast<double>(examples_.size());
  for (size_t d = 0; d < 3; ++d) {
    double sum = 0.0;
    for (const auto& e : examples_) sum += e.features[d];
    mean_[d] = sum / n;
    double sq = 0.0;
    for (const auto& e : examples_) {
      const double diff = e.features[d] - mean_[d];
      sq += diff * diff;
    }
    const double sd = std::sqrt(sq / n);
    stddev_[d] = sd > 0.0 ? sd : 1.0;
  }
}

double KnnEstimator::estimate(const BatchFeatures& query) const {
  if (examples_.empty()) throw ContractViolation("KNN estimator has no examples");
  const size_t n = examples_.size();
  const auto k = static_cast<size_t>(k_);
  if (n <= k) {
    double sum = 0.0;
    for (const auto& e : examples_) sum += e.serving_time_s;
    return sum / static_cast<double>(n);
  }
  std::vector<std::pair<double, size_t>> dist(n);
  for (size_t i = 0; i < n; ++i) {
    double d2 = 0.0;
    for (size_t d = 0; d < 3; ++d) {
      const double diff = (examples_[i].features[d] - query[d]) / stddev_[d];
      d2 += diff * diff;
    }
    dist[i] = {d2, i};
  }
  std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                    dist.end());
  double sum = 0.0;
  for (size_t i = 0; i < k; ++i) sum += examples_[dist[i].second].serving_time_s;
  return sum / static_cast<double>(k);
}

double KnnEstimator::estimate(const Batch& batch) const {
  return estimate(features_of(batch));
}

KnnEstimator KnnEstimator::continuous_learn(std::span<const BatchLog> logs,
                                            std::vector<size_t>* collected) const {
  if (collected) collected->clear();
  KnnEstimator next = *this;
  bool any = false;
  for (size_t i = 0; i < logs.size(); ++i) {
    const auto& log = logs[i];
    const BatchFeatures actual{static_cast<double>(log.batch_size),
                               static_cast<double>(log.batch_len),
                               static_cast<double>(log.actual_gen_len)};
    const double est = examples_.empty() ? 0.0 : estimate(actual);
    if (!needs_relearning_time(est, log.actual_time_s)) continue;
    next.examples_.push_back({actual, log.actual_time_s});
    if (collected) collected->push_back(i);
    any = true;
  }
  if (!any) return *this;
  next.refresh_stats();
  return next;
}

nlohmann::json KnnEstimator::to_json() const {
  nlohmann::json ex = nlohmann::json::array();
  for (const auto& e : examples_) {
    ex.push_back({e.features[0], e.features[1], e.features[2], e.serving_time_s});
  }
  return {{"k", k_},
          {"stats", {{"mean", mean_}, {"stddev", stddev_}}},
          {"examples", std::move(ex)}};
}

KnnEstimator KnnEstimator::from_json(const nlohmann::json& j) {
  std::vector<TimedBatch> examples;
  int k = 5;
  try {
    k = j.at("k").get<int>();
    for (const auto& e : j.at("examples")) {
      examples.push_back({{e.at(0).get<double>(), e.at(1).get<double>(),
                           e.at(2).get<double>()},
                          e.at(3).get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed KNN model: ") + e.what());
  }
  return KnnEstimator(std::move(examples), k);
}

}  // namespace magnus
