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

#include <gtest/gtest.h>

#include <random>

#include "scheduler/scheduler.h"
#include "test_util.h"

namespace magnus {
namespace {

using testing::make_batch;
using testing::make_request;

KnnEstimator linear_estimator() {
  std::vector<TimedBatch> ex;
  for (int b : {1, 4, 16}) {
    for (int g = 10; g <= 1000; g += 90) {
      ex.push_back({{double(b), 100.0, double(g)}, 0.1 + 0.04 * g});
    }
  }
  return KnnEstimator(ex, 3);
}

TEST(FifoSelect, TakesEarliestCreated) {
  BatchQueue q;
  EXPECT_FALSE(fifo_select(q).has_value());
  q.push(make_batch(1, {make_request(0, 5, 5)}, 3.0));
  q.push(make_batch(2, {make_request(1, 5, 5)}, 1.0));
  EXPECT_EQ(fifo_select(q)->id, 2);
  EXPECT_EQ(fifo_select(q)->id, 1);
  EXPECT_TRUE(q.empty());
}

TEST(HrrnSelect, MatchesBruteForceRatio) {
  const auto knn = linear_estimator();
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> n(1, 6), g(1, 900);
  std::uniform_real_distribution<double> arrival(0.0, 50.0);
  for (int trial = 0; trial < 200; ++trial) {
    BatchQueue q;
    const int count = n(rng);
    for (int i = 0; i < count; ++i) {
      q.push(make_batch(i, {make_request(i, 50, 1, g(rng), arrival(rng))}, double(i)));
    }
    const double now = 60.0;
    std::optional<size_t> best;
    double best_ratio = -1;
    for (size_t i = 0; i < q.size(); ++i) {
      const auto& b = q.batches()[i];
      const double ratio = (now - b.requests[0].arrival_time) / knn.estimate(b);
      if (!best || ratio > best_ratio) {
        best = i;
        best_ratio = ratio;
      }
    }
    const BatchId expected = q.batches()[*best].id;
    const auto sel = hrrn_select(q, &knn, now);
    ASSERT_TRUE(sel.has_value());
    EXPECT_EQ(sel->batch.id, expected);
    EXPECT_DOUBLE_EQ(sel->decision.response_ratio, best_ratio);
    EXPECT_FALSE(sel->decision.fifo_fallback);
    EXPECT_EQ(q.size(), static_cast<size_t>(count - 1));
  }
}

TEST(HrrnSelect, PrefersShortBatchAtEqualWait) {
  const auto knn = linear_estimator();
  BatchQueue q;
  q.push(make_batch(0, {make_request(0, 100, 1, 900, 0.0)}, 0.0));
  q.push(make_batch(1, {make_request(1, 100, 1, 20, 0.0)}, 1.0));
  EXPECT_EQ(hrrn_select(q, &knn, 10.0)->batch.id, 1);
}

TEST(HrrnSelect, TiesGoToEarliestCreated) {
  const auto knn = linear_estimator();
  BatchQueue q;
  q.push(make_batch(7, {make_request(0, 100, 1, 100, 0.0)}, 2.0));
  q.push(make_batch(3, {make_request(1, 100, 1, 100, 0.0)}, 1.0));
  EXPECT_EQ(hrrn_select(q, &knn, 5.0)->batch.id, 3);
}

TEST(HrrnSelect, FallsBackToFifoWithoutEstimator) {
  BatchQueue q;
  q.push(make_batch(4, {make_request(0, 10, 1, 500, 0.0)}, 0.0));
  q.push(make_batch(5, {make_request(1, 10, 1, 5, 0.0)}, 1.0));
  auto sel = hrrn_select(q, nullptr, 10.0);
  EXPECT_TRUE(sel->decision.fifo_fallback);
  EXPECT_EQ(sel->batch.id, 4);
  KnnEstimator empty({}, 5);
  sel = hrrn_select(q, &empty, 10.0);
  EXPECT_TRUE(sel->decision.fifo_fallback);
  EXPECT_EQ(sel->batch.id, 5);
  EXPECT_FALSE(hrrn_select(q, nullptr, 10.0).has_value());
}

TEST(HrrnSelect, NonPositiveEstimateFallsBack) {
  KnnEstimator zero({{{1, 1, 1}, 0.0}}, 1);
  BatchQueue q;
  q.push(make_batch(1, {make_request(0, 10, 1, 5, 0.0)}, 0.0));
  q.push(make_batch(2, {make_request(1, 10, 1, 5, 0.0)}, 1.0));
  auto sel = hrrn_select(q, &zero, 3.0);
  EXPECT_TRUE(sel->decision.fifo_fallback);
  EXPECT_EQ(sel->batch.id, 1);
}

}  // namespace
}  // namespace magnus
