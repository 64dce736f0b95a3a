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
#include <span>
#include <vector>

#include <json.hpp>

namespace magnus {

struct ForestParams {
  int n_trees = 100;
  int max_depth = 24;
  int min_leaf = 2;
};

// Dense row-major feature matrix with one regression target per row.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(size_t dim) : dim_(dim) {}

  void add(std::span<const double> features, double target);
  void append(const Dataset& other);

  size_t dim() const { return dim_; }
  size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  std::span<const double> row(size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  double target(size_t i) const { return targets_[i]; }
  const std::vector<double>& targets() const { return targets_; }

 private:
  size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<double> targets_;
};

struct TreeNode {
  int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int32_t left = -1;
  int32_t right = -1;
  double value = 0.0;  // mean target of the node's training samples

  bool is_leaf() const { return feature < 0; }
};

class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  double predict(std::span<const double> x) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  std::vector<TreeNode> nodes_;
};

// Bagged variance-reduction regression trees. Each tree is grown on a
// bootstrap sample drawn from a generator seeded by (seed, tree index);
// every split considers ceil(D/3) randomly chosen features first and keeps
// drawing the rest only when none of those admits a split.
class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest fit(const Dataset& data, const ForestParams& params,
                          uint64_t seed);

  double predict(std::span<const double> x) const;
  std::vector<double> tree_outputs(std::span<const double> x) const;

  const std::vector<RegressionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  uint64_t seed() const { return seed_; }
  size_t feature_dim() const { return feature_dim_; }

  nlohmann::json to_json() const;
  static RandomForest from_json(const nlohmann::json& j);

 private:
  std::vector<RegressionTree> trees_;
  ForestParams params_;
  uint64_t seed_ = 0;
  size_t feature_dim_ = 0;
};

}  // namespace magnus
