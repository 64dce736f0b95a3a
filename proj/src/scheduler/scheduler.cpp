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

#include "scheduler/scheduler.h"

#include <glog/logging.h>

#include <vector>

namespace magnus {

std::optional<Batch> fifo_select(BatchQueue& queue) {
  if (queue.empty()) return std::nullopt;
  // The queue is kept in (created_at, id) order.
  return queue.take(0);
}

std::optional<Selection> hrrn_select(BatchQueue& queue, const KnnEstimator* estimator,
                                     double now) {
  if (queue.empty()) return std::nullopt;

  auto fallback = [&](const std::string& why) {
    LOG(WARNING) << "HRRN estimator unusable (" << why << "); falling back to FIFO";
    Selection s{queue.take(0), {}};
    s.decision.batch_id = s.batch.id;
    s.decision.queuing_time_s = batch_queuing_time(s.batch, now);
    s.decision.fifo_fallback = true;
    return s;
  };
  if (estimator == nullptr || estimator->size() == 0) {
    return fallback("no serving-time examples");
  }

  std::optional<size_t> best;
  ScheduleDecision best_decision;
  try {
    for (size_t i = 0; i < queue.size(); ++i) {
      const Batch& b = queue.batches()[i];
      ScheduleDecision d;
      d.batch_id = b.id;
      d.queuing_time_s = batch_queuing_time(b, now);
      d.estimated_serving_time_s = estimator->estimate(b);
      if (!(d.estimated_serving_time_s > 0.0)) {
        return fallback("non-positive serving-time estimate");
      }
      d.response_ratio = d.queuing_time_s / d.estimated_serving_time_s;
      // Queue order is creation order, so strict > keeps the earliest on ties.
      if (!best || d.response_ratio > best_decision.response_ratio) {
        best = i;
        best_decision = d;
      }
    }
  } catch (const std::exception& e) {
    return fallback(e.what());
  }
  return Selection{queue.take(*best), best_decision};
}

}  // namespace magnus
