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

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "core/types.h"

namespace magnus {

// (batch size, batch length, batch generation length)
using BatchFeatures = std::array<double, 3>;

struct TimedBatch {
  BatchFeatures features{};
  double serving_time_s = 0.0;
};

// One served batch as seen by continuous learning.
struct BatchLog {
  int64_t batch_size = 0;
  TokenCount batch_len = 0;
  TokenCount predicted_gen_len = 0;
  TokenCount actual_gen_len = 0;
  double actual_time_s = 0.0;
};

// Collect a batch when the estimate misses by more than 2 s and by more than
// 20% of the actual serving time.
inline constexpr double kRelearnAbsSeconds = 2.0;
inline constexpr double kRelearnRelativeTime = 0.20;
bool needs_relearning_time(double estimated_s, double actual_s);

// K-nearest-neighbour regression on z-scored batch features. Immutable;
// continuous_learn() builds a replacement.
class KnnEstimator {
 public:
  KnnEstimator() = default;
  explicit KnnEstimator(std::vector<TimedBatch> examples, int k = 5);

  // Mean serving time of the k nearest stored examples (Euclidean distance
  // after z-scoring, ties by insertion order). With fewer than k examples,
  // the mean of all. Throws ContractViolation with no examples.
  double estimate(const BatchFeatures& query) const;
  // Uses (beta, L(B), G'(B)) of the batch.
  double estimate(const Batch& batch) const;

  KnnEstimator continuous_learn(std::span<const BatchLog> logs,
                                std::vector<size_t>* collected = nullptr) const;

  int k() const { return k_; }
  size_t size() const { return examples_.size(); }
  const std::vector<TimedBatch>& examples() const { return examples_; }
  const BatchFeatures& mean() const { return mean_; }
  const BatchFeatures& stddev() const { return stddev_; }

  nlohmann::json to_json() const;
  static KnnEstimator from_json(const nlohmann::json& j);

 private:
  void refresh_stats();

  std::vector<TimedBatch> examples_;
  int k_ = 5;
  BatchFeatures mean_{};
  BatchFeatures stddev_{1.0, 1.0, 1.0};
};

BatchFeatures features_of(const Batch& batch);

}  // namespace magnus
