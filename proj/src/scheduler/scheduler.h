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

#include <optional>

#include "batcher/wma_batcher.h"
#include "core/types.h"
#include "estimator/knn_estimator.h"

namespace magnus {

struct ScheduleDecision {
  BatchId batch_id = 0;
  double response_ratio = 0.0;  // queuing_time / estimated_serving_time
  double queuing_time_s = 0.0;
  double estimated_serving_time_s = 0.0;
  bool fifo_fallback = false;  // estimator unusable; picked FIFO instead
};

struct Selection {
  Batch batch;
  ScheduleDecision decision;
};

// Removes and returns the earliest-created batch.
std::optional<Batch> fifo_select(BatchQueue& queue);

// Removes and returns the batch with the highest queuing-time to estimated
// serving-time ratio; ties go to the earliest-created batch. Falls back to
// FIFO (and logs) when the estimator is missing, empty, or returns a
// non-positive estimate.
std::optional<Selection> hrrn_select(BatchQueue& queue, const KnnEstimator* estimator,
                                     double now);

}  // namespace magnus
