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

#include "predictor/genlen_predictor.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>

namespace magnus {

namespace {

constexpr int kModelVersion = 1;
const std::string kSharedKey;

}  // namespace

std::string_view to_string(PredictorMode mode) {
  switch (mode) {
    case PredictorMode::kUilo:
      return "UILO";
    case PredictorMode::kRaft:
      return "RAFT";
    case PredictorMode::kInst:
      return "INST";
    case PredictorMode::kUsin:
      return "USIN";
  }
  return "?";
}

PredictorMode parse_predictor_mode(std::string_view name) {
  std::string upper(name);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (upper == "UILO") return PredictorMode::kUilo;
  if (upper == "RAFT") return PredictorMode::kRaft;
  if (upper == "INST") return PredictorMode::kInst;
  if (upper == "USIN") return PredictorMode::kUsin;
  throw ConfigError("unknown predictor mode: " + std::string(name));
}

size_t feature_dim(PredictorMode mode) {
  switch (mode) {
    case PredictorMode::kUilo:
    case PredictorMode::kRaft:
      return 1;
    case PredictorMode::kInst:
      return 1 + kAppGroups;
    case PredictorMode::kUsin:
      return 1 + kAppGroups + kUserGroups;
  }
  return 1;
}

std::vector<double> featurize(const Request& req, PredictorMode mode,
                              const EmbeddingProvider& embedder) {
  std::vector<double> out;
  out.reserve(feature_dim(mode));
  out.push_back(static_cast<double>(req.user_input_len));
  if (mode == PredictorMode::kInst) {
    const auto app = compress(embedder.embed(req.instruction), kAppGroups);
    out.insert(out.end(), app.begin(), app.end());
  } else if (mode == PredictorMode::kUsin) {
    const auto both = embedder.embed_batch({req.instruction, req.user_input});
    const auto app = compress(both[0], kAppGroups);
    const auto user = compress(both[1], kUserGroups);
    out.insert(out.end(), app.begin(), app.end());
    out.insert(out.end(), user.begin(), user.end());
  }
  return out;
}

bool needs_relearning(TokenCount predicted, TokenCount actual) {
  const double err = std::abs(static_cast<double>(predicted - actual));
  return err > kRelearnAbsTokens && err > kRelearnRelative * static_cast<double>(actual);
}

GenLenPredictor GenLenPredictor::train(
    std::span<const Request> examples, PredictorMode mode,
    const PredictorOptions& options,
    std::shared_ptr<const EmbeddingProvider> embedder) {
  if (options.g_max < 1) throw ConfigError("predictor g_max must be >= 1");
  GenLenPredictor model;
  model.mode_ = mode;
  model.options_ = options;
  if (embedder) model.embedder_ = std::move(embedder);
  if (mode == PredictorMode::kUilo) return model;
  if (examples.empty()) {
    throw ContractViolation("cannot train a generation-length predictor on no examples");
  }
  for (const auto& req : examples) {
    auto [it, _] = model.train_sets_.try_emplace(model.model_key(req), feature_dim(mode));
    it->second.add(featurize(req, mode, *model.embedder_),
                   static_cast<double>(req.actual_gen_len));
  }
  model.fit_all();
  return model;
}

const std::string& GenLenPredictor::model_key(const Request& req) const {
  return mode_ == PredictorMode::kRaft ? req.task_id : kSharedKey;
}

void GenLenPredictor::fit_all() {
  forests_.clear();
  for (const auto& [key, data] : train_sets_) {
    forests_[key] = std::make_shared<const RandomForest>(
        RandomForest::fit(data, options_.forest, options_.seed));
  }
}

const RandomForest& GenLenPredictor::forest_for(const std::string& task_id) const {
  const auto& key = mode_ == PredictorMode::kRaft ? task_id : kSharedKey;
  auto it = forests_.find(key);
  if (it == forests_.end()) {
    throw ContractViolation("no trained " + std::string(to_string(mode_)) +
                            " model for task '" + task_id + "'");
  }
  return *it->second;
}

double GenLenPredictor::predict_raw(const Request& req) const {
  if (mode_ == PredictorMode::kUilo) return static_cast<double>(req.user_input_len);
  const auto& forest = forest_for(req.task_id);
  return forest.predict(featurize(req, mode_, *embedder_));
}

TokenCount GenLenPredictor::predict(const Request& req) const {
  const auto rounded = static_cast<TokenCount>(std::llround(predict_raw(req)));
  return std::clamp<TokenCount>(rounded, 1, options_.g_max);
}

TokenCount GenLenPredictor::predict(const Request& req, PredictorMode mode) const {
  if (mode != mode_) {
    throw ContractViolation("predictor trained for " + std::string(to_string(mode_)) +
                            " queried as " + std::string(to_string(mode)));
  }
  return predict(req);
}

GenLenPredictor GenLenPredictor::continuous_learn(
    std::span<const Request> served, std::vector<RequestId>* collected) const {
  if (collected) collected->clear();
  if (mode_ == PredictorMode::kUilo) return *this;
  GenLenPredictor next = *this;
  bool any = false;
  for (const auto& req : served) {
    if (!req.predicted_gen_len) continue;
    if (!needs_relearning(*req.predicted_gen_len, req.actual_gen_len)) continue;
    auto [it, _] = next.train_sets_.try_emplace(model_key(req), feature_dim(mode_));
    it->second.add(featurize(req, mode_, *embedder_),
                   static_cast<double>(req.actual_gen_len));
    if (collected) collected->push_back(req.id);
    any = true;
  }
  if (!any) return *this;
  next.fit_all();
  return next;
}

size_t GenLenPredictor::training_size() const {
  size_t n = 0;
  for (const auto& [_, data] : train_sets_) n += data.size();
  return n;
}

void GenLenPredictor::set_embedder(std::shared_ptr<const EmbeddingProvider> embedder) {
  if (!embedder) throw ContractViolation("null embedding provider");
  embedder_ = std::move(embedder);
}

nlohmann::json GenLenPredictor::to_json(bool include_training_set) const {
  nlohmann::json j = {
      {"version", kModelVersion},
      {"mode", std::string(to_string(mode_))},
      {"seed", options_.seed},
      {"g_max", options_.g_max},
      {"hyperparams",
       {{"n_trees", options_.forest.n_trees},
        {"max_depth", options_.forest.max_depth},
        {"min_leaf", options_.forest.min_leaf},
        {"max_features", "ceil(D/3)"}}},
      {"feature_order", "uil,app[4],user[16]"}};
  if (mode_ == PredictorMode::kRaft) {
    nlohmann::json per_task = nlohmann::json::array();
    for (const auto& [task, forest] : forests_) {
      per_task.push_back({{"task_id", task}, {"trees", forest->to_json().at("trees")}});
    }
    j["per_task"] = std::move(per_task);
  } else if (mode_ != PredictorMode::kUilo) {
    j["trees"] = forests_.at(kSharedKey)->to_json().at("trees");
  }
  if (include_training_set && mode_ != PredictorMode::kUilo) {
    nlohmann::json sets = nlohmann::json::array();
    for (const auto& [key, data] : train_sets_) {
      nlohmann::json rows = nlohmann::json::array();
      for (size_t i = 0; i < data.size(); ++i) {
        const auto r = data.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      sets.push_back({{"key", key}, {"x", std::move(rows)}, {"y", data.targets()}});
    }
    j["train_set"] = std::move(sets);
  }
  return j;
}

GenLenPredictor GenLenPredictor::from_json(
    const nlohmann::json& j, std::shared_ptr<const EmbeddingProvider> embedder) {
  GenLenPredictor model;
  if (embedder) model.embedder_ = std::move(embedder);
  try {
    if (j.at("version").get<int>() != kModelVersion) {
      throw ConfigError("unsupported predictor model version");
    }
    model.mode_ = parse_predictor_mode(j.at("mode").get<std::string>());
    model.options_.seed = j.at("seed").get<uint64_t>();
    model.options_.g_max = j.value("g_max", TokenCount{1024});
    const auto& hp = j.at("hyperparams");
    model.options_.forest.n_trees = hp.at("n_trees").get<int>();
    model.options_.forest.max_depth = hp.at("max_depth").get<int>();
    model.options_.forest.min_leaf = hp.at("min_leaf").get<int>();
    const size_t dim = feature_dim(model.mode_);

    auto read_forest = [&](const nlohmann::json& trees) {
      nlohmann::json wrapped = {{"feature_dim", dim},
                                {"seed", model.options_.seed},
                                {"hyperparams", hp},
                                {"trees", trees}};
      return std::make_shared<const RandomForest>(RandomForest::from_json(wrapped));
    };
    if (model.mode_ == PredictorMode::kRaft) {
      for (const auto& entry : j.at("per_task")) {
        model.forests_[entry.at("task_id").get<std::string>()] =
            read_forest(entry.at("trees"));
      }
    } else if (model.mode_ != PredictorMode::kUilo) {
      model.forests_[kSharedKey] = read_forest(j.at("trees"));
    }
    if (j.contains("train_set")) {
      for (const auto& set : j.at("train_set")) {
        Dataset data(dim);
        const auto& xs = set.at("x");
        const auto& ys = set.at("y");
        if (xs.size() != ys.size()) throw ConfigError("train_set x/y size mismatch");
        for (size_t i = 0; i < xs.size(); ++i) {
          const auto row = xs[i].get<std::vector<double>>();
          if (row.size() != dim) throw ConfigError("train_set row width mismatch");
          data.add(row, ys[i].get<double>());
        }
        model.train_sets_[set.at("key").get<std::string>()] = std::move(data);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed predictor model: ") + e.what());
  }
  return model;
}

double rmse(const GenLenPredictor& model, std::span<const Request> testset) {
  if (testset.empty()) throw ContractViolation("rmse over an empty test set");
  double sq = 0.0;
  for (const auto& req : testset) {
    const double err = static_cast<double>(model.predict(req) - req.actual_gen_len);
    sq += err * err;
  }
  return std::sqrt(sq / static_cast<double>(testset.size()));
}

GenLenPredictor load_predictor(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open predictor model: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed predictor model " + path + ": " + e.what());
  }
  return GenLenPredictor::from_json(j);
}

void save_predictor(const GenLenPredictor& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write predictor model: " + path);
  out << model.to_json().dump() << '\n';
}

}  // namespace magnus
