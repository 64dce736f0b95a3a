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

#include "core/types.h"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace magnus {

TokenCount Request::predicted_or_throw() const {
  if (!predicted_gen_len) {
    throw ContractViolation("request " + std::to_string(id) +
                            " has no predicted generation length");
  }
  return *predicted_gen_len;
}

void CostCoefficients::validate() const {
  if (a0 < 0 || a1 < 0 || b0 < 0 || b1 < 0 || reload_penalty < 0) {
    throw ConfigError("cost coefficients must be non-negative");
  }
}

void LlmProfile::validate() const {
  if (!(theta > 0)) throw ConfigError("profile.theta must be > 0");
  if (!(delta > 0)) throw ConfigError("profile.delta must be > 0");
  if (l_max < 1 || g_max < 1) {
    throw ConfigError("profile.l_max and profile.g_max must be >= 1");
  }
  cost.validate();
}

TokenCount batch_length(const Batch& batch) {
  if (batch.empty()) throw ContractViolation("batch_length of empty batch");
  TokenCount out = 0;
  for (const auto& r : batch.requests) out = std::max(out, r.request_len);
  return out;
}

TokenCount batch_predicted_gen_len(const Batch& batch) {
  if (batch.empty()) {
    throw ContractViolation("batch_predicted_gen_len of empty batch");
  }
  TokenCount out = 0;
  for (const auto& r : batch.requests) {
    out = std::max(out, r.predicted_or_throw());
  }
  return out;
}

TokenCount batch_actual_gen_len(const Batch& batch) {
  if (batch.empty()) {
    throw ContractViolation("batch_actual_gen_len of empty batch");
  }
  TokenCount out = 0;
  for (const auto& r : batch.requests) out = std::max(out, r.actual_gen_len);
  return out;
}

double batch_earliest_arrival(const Batch& batch) {
  if (batch.empty()) throw ContractViolation("arrival of empty batch");
  double out = batch.requests.front().arrival_time;
  for (const auto& r : batch.requests) out = std::min(out, r.arrival_time);
  return out;
}

double batch_queuing_time(const Batch& batch, double now) {
  return std::max(0.0, now - batch_earliest_arrival(batch));
}

int64_t static_batch_size(const LlmProfile& profile) {
  profile.validate();
  const double per_request =
      static_cast<double>(profile.l_max + profile.g_max) * profile.delta;
  const auto beta = static_cast<int64_t>(std::floor(profile.theta / per_request));
  if (beta < 1) {
    throw ConfigError(
        "profile cannot serve a single maximal request: theta < (l_max + "
        "g_max) * delta");
  }
  return beta;
}

void to_json(nlohmann::json& j, const CostCoefficients& c) {
  j = nlohmann::json{{"a0", c.a0},
                     {"a1", c.a1},
                     {"b0", c.b0},
                     {"b1", c.b1},
                     {"reload_penalty", c.reload_penalty}};
}

void from_json(const nlohmann::json& j, CostCoefficients& c) {
  c = CostCoefficients{};
  if (!j.is_object()) throw ConfigError("cost must be a JSON object");
  c.a0 = j.value("a0", c.a0);
  c.a1 = j.value("a1", c.a1);
  c.b0 = j.value("b0", c.b0);
  c.b1 = j.value("b1", c.b1);
  c.reload_penalty = j.value("reload_penalty", c.reload_penalty);
}

void to_json(nlohmann::json& j, const LlmProfile& p) {
  j = nlohmann::json{{"theta", p.theta},
                     {"delta", p.delta},
                     {"l_max", p.l_max},
                     {"g_max", p.g_max},
                     {"cost", p.cost}};
}

void from_json(const nlohmann::json& j, LlmProfile& p) {
  p = LlmProfile{};
  if (!j.is_object()) throw ConfigError("profile must be a JSON object");
  try {
    p.theta = j.value("theta", p.theta);
    p.delta = j.value("delta", p.delta);
    p.l_max = j.value("l_max", p.l_max);
    p.g_max = j.value("g_max", p.g_max);
    if (j.contains("cost")) p.cost = j.at("cost").get<CostCoefficients>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid profile: ") + e.what());
  }
  p.validate();
}

LlmProfile load_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open profile file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed profile JSON in " + path + ": " + e.what());
  }
  return j.get<LlmProfile>();
}

}  // namespace magnus
