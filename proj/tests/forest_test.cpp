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

#include <functional>
#include <numeric>
#include <random>

#include "core/types.h"
#include "predictor/forest.h"

namespace magnus {
namespace {

Dataset make_data(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> noise(0.0, 0.1);
  Dataset d(3);
  for (size_t i = 0; i < n; ++i) {
    const double x[3] = {u(rng), u(rng), u(rng)};
    d.add(x, 2.0 * x[0] + (x[1] > 5.0 ? 10.0 : 0.0) + noise(rng));
  }
  return d;
}

double walk(const RegressionTree& tree, std::span<const double> x) {
  const auto& nodes = tree.nodes();
  int32_t i = 0;
  while (nodes[i].feature >= 0) {
    i = x[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  }
  return nodes[i].value;
}

int depth(const std::vector<TreeNode>& nodes, int32_t i) {
  if (nodes[i].feature < 0) return 0;
  return 1 + std::max(depth(nodes, nodes[i].left), depth(nodes, nodes[i].right));
}

TEST(RandomForest, PredictionIsMeanOfTreeWalks) {
  const auto data = make_data(300, 1);
  ForestParams params{20, 8, 2};
  const auto forest = RandomForest::fit(data, params, 42);
  ASSERT_EQ(forest.trees().size(), 20u);
  const double x[3] = {3.3, 6.1, 0.5};
  double sum = 0;
  for (const auto& t : forest.trees()) sum += walk(t, x);
  EXPECT_NEAR(forest.predict(x), sum / 20.0, 1e-12);
  const auto outs = forest.tree_outputs(x);
  EXPECT_NEAR(std::accumulate(outs.begin(), outs.end(), 0.0), sum, 1e-9);
}

TEST(RandomForest, RespectsDepthLimit) {
  const auto data = make_data(500, 2);
  for (int max_depth : {1, 3, 6}) {
    const auto forest = RandomForest::fit(data, {5, max_depth, 1}, 3);
    for (const auto& t : forest.trees()) EXPECT_LE(depth(t.nodes(), 0), max_depth);
  }
}

TEST(RandomForest, LearnsSimpleFunction) {
  const auto train = make_data(2000, 3);
  const auto test = make_data(200, 4);
  const auto forest = RandomForest::fit(train, {30, 24, 2}, 5);
  double se = 0;
  for (size_t i = 0; i < test.size(); ++i) {
    const double e = forest.predict(test.row(i)) - test.target(i);
    se += e * e;
  }
  EXPECT_LT(std::sqrt(se / test.size()), 1.0);
}

TEST(RandomForest, DeterministicPerSeed) {
  const auto data = make_data(400, 6);
  const auto a = RandomForest::fit(data, {10, 10, 2}, 9);
  const auto b = RandomForest::fit(data, {10, 10, 2}, 9);
  const auto c = RandomForest::fit(data, {10, 10, 2}, 10);
  EXPECT_EQ(a.to_json(), b.to_json());
  EXPECT_NE(a.to_json(), c.to_json());
}

TEST(RandomForest, JsonRoundTripPreservesPredictions) {
  const auto data = make_data(300, 7);
  const auto forest = RandomForest::fit(data, {8, 12, 2}, 11);
  const auto copy = RandomForest::from_json(forest.to_json());
  EXPECT_EQ(copy.feature_dim(), 3u);
  for (size_t i = 0; i < data.size(); ++i) {
    EXPECT_EQ(copy.predict(data.row(i)), forest.predict(data.row(i)));
  }
}

TEST(RandomForest, ConstantTargetGivesSingleLeaf) {
  Dataset d(2);
  for (int i = 0; i < 50; ++i) {
    const double x[2] = {static_cast<double>(i), static_cast<double>(i % 3)};
    d.add(x, 4.0);
  }
  const auto forest = RandomForest::fit(d, {4, 10, 2}, 1);
  for (const auto& t : forest.trees()) EXPECT_EQ(t.nodes().size(), 1u);
  const double q[2] = {100.0, 1.0};
  EXPECT_DOUBLE_EQ(forest.predict(q), 4.0);
}

TEST(RandomForest, EmptyDataThrows) {
  EXPECT_THROW(RandomForest::fit(Dataset(3), {}, 0), ContractViolation);
  EXPECT_THROW(RandomForest::fit(Dataset(0), {}, 0), ContractViolation);
}

}  // namespace
}  // namespace magnus
