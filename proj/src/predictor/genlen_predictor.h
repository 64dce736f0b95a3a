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

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "core/types.h"
#include "predictor/embedding.h"
#include "predictor/forest.h"

namespace magnus {

// Feature strategies for the generation-length predictor.
//   kUilo: the user input length is the prediction; no model.
//   kRaft: one forest per task over [UIL].
//   kInst: one forest over [UIL, compressed instruction embedding (4)].
//   kUsin: kInst plus the compressed user-input embedding (16).
enum class PredictorMode { kUilo, kRaft, kInst, kUsin };

std::string_view to_string(PredictorMode mode);
PredictorMode parse_predictor_mode(std::string_view name);

size_t feature_dim(PredictorMode mode);

std::vector<double> featurize(const Request& req, PredictorMode mode,
                              const EmbeddingProvider& embedder);

// A served request is re-learned when its prediction error is above 10 tokens
// and above 10% of the actual generation length.
inline constexpr double kRelearnAbsTokens = 10.0;
inline constexpr double kRelearnRelative = 0.10;
bool needs_relearning(TokenCount predicted, TokenCount actual);

struct PredictorOptions {
  ForestParams forest;
  uint64_t seed = 0;
  TokenCount g_max = 1024;
};

// Immutable generation-length model. Copies share the underlying forests;
// continuous_learn() returns a fresh predictor and leaves this one intact.
class GenLenPredictor {
 public:
  GenLenPredictor() = default;

  static GenLenPredictor train(
      std::span<const Request> examples, PredictorMode mode,
      const PredictorOptions& options,
      std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

  // G'(p): rounded mean of tree outputs clamped to [1, g_max]; UIL for kUilo.
  TokenCount predict(const Request& req) const;
  // Same, but throws ContractViolation if `mode` differs from the model's.
  TokenCount predict(const Request& req, PredictorMode mode) const;

  // Unrounded, unclamped forest mean (UIL for kUilo).
  double predict_raw(const Request& req) const;

  // Appends served requests that need re-learning to the training set and
  // retrains from scratch. Returns a copy of *this when none qualify.
  // `collected` receives the ids that were appended.
  GenLenPredictor continuous_learn(std::span<const Request> served,
                                   std::vector<RequestId>* collected = nullptr) const;

  PredictorMode mode() const { return mode_; }
  const PredictorOptions& options() const { return options_; }
  size_t training_size() const;
  const EmbeddingProvider& embedder() const { return *embedder_; }
  void set_embedder(std::shared_ptr<const EmbeddingProvider> embedder);

  // Forest used for `task_id` (the shared forest unless kRaft).
  const RandomForest& forest_for(const std::string& task_id) const;

  nlohmann::json to_json(bool include_training_set = true) const;
  static GenLenPredictor from_json(
      const nlohmann::json& j,
      std::shared_ptr<const EmbeddingProvider> embedder = nullptr);

 private:
  void fit_all();
  const std::string& model_key(const Request& req) const;

  PredictorMode mode_ = PredictorMode::kUilo;
  PredictorOptions options_;
  std::shared_ptr<const EmbeddingProvider> embedder_ =
      std::make_shared<HashingEmbedder>();
  // Keyed by task id for kRaft, by "" otherwise.
  std::map<std::string, Dataset> train_sets_;
  std::map<std::string, std::shared_ptr<const RandomForest>> forests_;
};

// Root mean squared error of predict() against actual generation lengths.
double rmse(const GenLenPredictor& model, std::span<const Request> testset);

GenLenPredictor load_predictor(const std::string& path);
void save_predictor(const GenLenPredictor& model, const std::string& path);

}  // namespace magnus
