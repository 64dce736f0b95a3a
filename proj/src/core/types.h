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
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace magnus {

using TokenCount = int64_t;
using RequestId = int64_t;
using BatchId = int64_t;

// Thrown for invalid configuration or input files. Maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Thrown when a caller breaks an operation's precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Request {
  RequestId id = 0;
  std::string app_id;
  std::string task_id;
  std::string instruction;
  std::string user_input;
  TokenCount user_input_len = 0;  // UIL
  TokenCount request_len = 0;     // L(p): instruction + user input
  TokenCount actual_gen_len = 0;  // G(p), ground truth
  std::optional<TokenCount> predicted_gen_len;  // G'(p)
  double arrival_time = 0.0;  // seconds

  TokenCount predicted_or_throw() const;
};

struct Batch {
  BatchId id = 0;
  std::vector<Request> requests;
  bool insertable = true;
  double created_at = 0.0;

  size_t size() const { return requests.size(); }
  bool empty() const { return requests.empty(); }
};

struct CostCoefficients {
  double a0 = 0.1;    // init phase, seconds
  double a1 = 1e-6;   // init phase, seconds per prompt token
  double b0 = 0.04;   // per decode iteration, seconds
  double b1 = 1e-8;   // per decode iteration, seconds per KV entry read
  double reload_penalty = 1.0;  // seconds charged after an OOM

  void validate() const;
};

struct LlmProfile {
  double theta = 14336.0;  // memory units available for the KV cache
  double delta = 1.0;      // memory units per token's K/V tensors
  TokenCount l_max = 1024;
  TokenCount g_max = 1024;
  CostCoefficients cost;

  void validate() const;
};

// L(B): longest request length in the batch.
TokenCount batch_length(const Batch& batch);

// G'(B): longest predicted generation length. Throws if a member has none.
TokenCount batch_predicted_gen_len(const Batch& batch);

// G(B): longest actual generation length.
TokenCount batch_actual_gen_len(const Batch& batch);

// Earliest member arrival time.
double batch_earliest_arrival(const Batch& batch);

// T_q(B): longest queuing time among member requests at `now`.
double batch_queuing_time(const Batch& batch, double now);

// Vanilla batch size floor(theta / ((l_max + g_max) * delta)). Throws
// ConfigError when the profile cannot hold even one maximal request.
int64_t static_batch_size(const LlmProfile& profile);

void to_json(nlohmann::json& j, const CostCoefficients& c);
void from_json(const nlohmann::json& j, CostCoefficients& c);
void to_json(nlohmann::json& j, const LlmProfile& p);
void from_json(const nlohmann::json& j, LlmProfile& p);

LlmProfile load_profile(const std::string& path);

}  // namespace magnus
