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

#include "predictor/forest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

#include "core/types.h"

namespace magnus {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Grows one tree over a bootstrap sample. Samples are addressed by "slot"
// (position in the bootstrap draw); each feature keeps its own slot ordering
// sorted by feature value, and node ranges are stable-partitioned in every
// ordering after a split so no node ever re-sorts.
class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const ForestParams& params, uint64_t seed)
      : data_(data), params_(params), rng_(seed) {}

  RegressionTree build() {
    const size_t n = data_.size();
    const size_t dim = data_.dim();
    std::uniform_int_distribution<size_t> pick(0, n - 1);
    rows_.resize(n);
    for (auto& r : rows_) r = pick(rng_);
    y_.resize(n);
    for (size_t s = 0; s < n; ++s) y_[s] = data_.target(rows_[s]);

    order_.assign(dim, std::vector<uint32_t>(n));
    for (size_t f = 0; f < dim; ++f) {
      auto& ord = order_[f];
      std::iota(ord.begin(), ord.end(), 0u);
      std::stable_sort(ord.begin(), ord.end(), [&](uint32_t a, uint32_t b) {
        return x(a, f) < x(b, f);
      });
    }
    goes_left_.assign(n, 0);
    scratch_.resize(n);
    features_.resize(dim);
    std::iota(features_.begin(), features_.end(), 0);
    tries_ = (dim + 2) / 3;

    grow(0, n, 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  double x(uint32_t slot, size_t f) const { return data_.row(rows_[slot])[f]; }

  struct Split {
    bool found = false;
    size_t feature = 0;
    size_t n_left = 0;
    double threshold = 0.0;
    double score = -1.0;
  };

  void evaluate(size_t f, size_t begin, size_t end, double total, Split& best) {
    const auto& ord = order_[f];
    const size_t count = end - begin;
    const size_t min_leaf = static_cast<size_t>(std::max(1, params_.min_leaf));
    double left_sum = 0.0;
    for (size_t i = 1; i < count; ++i) {
      left_sum += y_[ord[begin + i - 1]];
      if (i < min_leaf || count - i < min_leaf) continue;
      const double lo = x(ord[begin + i - 1], f);
      const double hi = x(ord[begin + i], f);
      if (!(lo < hi)) continue;
      const double right_sum = total - left_sum;
      const double score = left_sum * left_sum / static_cast<double>(i) +
                           right_sum * right_sum / static_cast<double>(count - i);
      if (!best.found || score > best.score) {
        double thr = lo + (hi - lo) / 2.0;
        if (!(thr < hi)) thr = lo;
        best = Split{true, f, i, thr, score};
      }
    }
  }

  int32_t grow(size_t begin, size_t end, int depth) {
    const auto index = static_cast<int32_t>(nodes_.size());
    nodes_.emplace_back();
    const size_t count = end - begin;
    const auto& any = order_[0];

    double total = 0.0;
    double lo_y = y_[any[begin]];
    double hi_y = lo_y;
    for (size_t i = begin; i < end; ++i) {
      const double v = y_[any[i]];
      total += v;
      lo_y = std::min(lo_y, v);
      hi_y = std::max(hi_y, v);
    }
    nodes_[index].value = total / static_cast<double>(count);

    const size_t min_leaf = static_cast<size_t>(std::max(1, params_.min_leaf));
    if (depth >= params_.max_depth || count < 2 * min_leaf || lo_y == hi_y) {
      return index;
    }

    std::shuffle(features_.begin(), features_.end(), rng_);
    Split best;
    for (size_t k = 0; k < features_.size(); ++k) {
      if (k >= tries_ && best.found) break;
      evaluate(static_cast<size_t>(features_[k]), begin, end, total, best);
    }
    if (!best.found) return index;

    const auto& chosen = order_[best.feature];
    for (size_t i = begin; i < end; ++i) goes_left_[chosen[i]] = 0;
    for (size_t i = begin; i < begin + best.n_left; ++i) goes_left_[chosen[i]] = 1;
    for (auto& ord : order_) {
      size_t l = begin;
      size_t r = 0;
      for (size_t i = begin; i < end; ++i) {
        const uint32_t s = ord[i];
        if (goes_left_[s]) {
          ord[l++] = s;
        } else {
          scratch_[r++] = s;
        }
      }
      std::copy(scratch_.begin(), scratch_.begin() + r, ord.begin() + l);
    }

    const size_t mid = begin + best.n_left;
    const int32_t left = grow(begin, mid, depth + 1);
    const int32_t right = grow(mid, end, depth + 1);
    auto& node = nodes_[index];
    node.feature = static_cast<int32_t>(best.feature);
    node.threshold = best.threshold;
    node.left = left;
    node.right = right;
    return index;
  }

  const Dataset& data_;
  const ForestParams& params_;
  std::mt19937_64 rng_;
  std::vector<size_t> rows_;
  std::vector<double> y_;
  std::vector<std::vector<uint32_t>> order_;
  std::vector<uint8_t> goes_left_;
  std::vector<uint32_t> scratch_;
  std::vector<int> features_;
  size_t tries_ = 1;
  std::vector<TreeNode> nodes_;
};

}  // namespace

void Dataset::add(std::span<const double> features, double target) {
  if (features.size() != dim_) {
    throw ContractViolation("dataset row has " + std::to_string(features.size()) +
                            " features, expected " + std::to_string(dim_));
  }
  features_.insert(features_.end(), features.begin(), features.end());
  targets_.push_back(target);
}

void Dataset::append(const Dataset& other) {
  if (other.dim_ != dim_) throw ContractViolation("dataset dim mismatch");
  features_.insert(features_.end(), other.features_.begin(), other.features_.end());
  targets_.insert(targets_.end(), other.targets_.begin(), other.targets_.end());
}

double RegressionTree::predict(std::span<const double> x) const {
  int32_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes_[i].value;
}

RandomForest RandomForest::fit(const Dataset& data, const ForestParams& params,
                               uint64_t seed) {
  if (data.empty()) throw ContractViolation("cannot fit a forest on no examples");
  if (data.dim() == 0) throw ContractViolation("cannot fit a forest on zero features");
  if (params.n_trees < 1 || params.max_depth < 0 || params.min_leaf < 1) {
    throw ConfigError("invalid forest hyperparameters");
  }
  RandomForest forest;
  forest.params_ = params;
  forest.seed_ = seed;
  forest.feature_dim_ = data.dim();
  forest.trees_.resize(static_cast<size_t>(params.n_trees));

  auto grow_range = [&](size_t first, size_t stride) {
    for (size_t t = first; t < forest.trees_.size(); t += stride) {
      TreeBuilder builder(data, params, splitmix64(seed ^ splitmix64(t)));
      forest.trees_[t] = builder.build();
    }
  };
  const size_t workers = std::min<size_t>(
      std::max(1u, std::thread::hardware_concurrency()), forest.trees_.size());
  if (workers <= 1) {
    grow_range(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (size_t w = 0; w < workers; ++w) pool.emplace_back(grow_range, w, workers);
  }
  return forest;
}

double RandomForest::predict(std::span<const double> x) const {
  if (x.size() != feature_dim_) {
    throw ContractViolation("forest expects " + std::to_string(feature_dim_) +
                            " features, got " + std::to_string(x.size()));
  }
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return sum / static_cast<double>(trees_.size());
}

std::vector<double> RandomForest::tree_outputs(std::span<const double> x) const {
  std::vector<double> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(t.predict(x));
  return out;
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes()) {
      nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    }
    trees.push_back({{"nodes", std::move(nodes)}});
  }
  return {{"feature_dim", feature_dim_},
          {"seed", seed_},
          {"hyperparams",
           {{"n_trees", params_.n_trees},
            {"max_depth", params_.max_depth},
            {"min_leaf", params_.min_leaf},
            {"max_features", "ceil(D/3)"}}},
          {"trees", std::move(trees)}};
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
  RandomForest forest;
  try {
    forest.feature_dim_ = j.at("feature_dim").get<size_t>();
    forest.seed_ = j.at("seed").get<uint64_t>();
    const auto& hp = j.at("hyperparams");
    forest.params_.n_trees = hp.at("n_trees").get<int>();
    forest.params_.max_depth = hp.at("max_depth").get<int>();
    forest.params_.min_leaf = hp.at("min_leaf").get<int>();
    for (const auto& t : j.at("trees")) {
      std::vector<TreeNode> nodes;
      for (const auto& n : t.at("nodes")) {
        TreeNode node;
        node.feature = n.at(0).get<int32_t>();
        node.threshold = n.at(1).get<double>();
        node.left = n.at(2).get<int32_t>();
        node.right = n.at(3).get<int32_t>();
        node.value = n.at(4).get<double>();
        nodes.push_back(node);
      }
      const auto size = static_cast<int32_t>(nodes.size());
      for (const auto& node : nodes) {
        if (!node.is_leaf() &&
            (node.left <= 0 || node.left >= size || node.right <= 0 ||
             node.right >= size || node.feature >= static_cast<int32_t>(forest.feature_dim_))) {
          throw ConfigError("forest model has a dangling tree node");
        }
      }
      if (nodes.empty()) throw ConfigError("forest model has an empty tree");
      forest.trees_.emplace_back(std::move(nodes));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed forest model: ") + e.what());
  }
  if (forest.trees_.empty()) throw ConfigError("forest model has no trees");
  return forest;
}

}  // namespace magnus
