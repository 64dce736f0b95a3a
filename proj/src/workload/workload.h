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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "core/types.h"

namespace magnus {

using Trace = std::vector<Request>;

// One application task of the synthetic workload.
//
// User input length follows a lognormal(uil_mu, uil_sigma) clipped to
// [uil_min, uil_max]; the generation length is
//   round(slope * UIL + intercept + noise_sigma * e)
// clamped to [1, g_max], where e ~ N(0, 1) is split into a part the user
// input text reveals (a latent topic, variance `semantic_share`) and an
// unobservable residual.
struct TaskSpec {
  std::string app_id;
  std::string task_id;
  std::string instruction;
  std::string keyword;  // first token of every user input for this task
  double uil_mu = 4.0;
  double uil_sigma = 0.5;
  TokenCount uil_min = 2;
  TokenCount uil_max = 600;
  double slope = 1.0;
  double intercept = 0.0;
  double noise_sigma = 10.0;
  double semantic_share = 0.6;
  double target_rho = 0.0;  // documentation only
  double share = 1.0;

  TokenCount instruction_len() const;
};

struct WorkloadConfig {
  double rate = 1.0;  // requests per second
  int64_t n_requests = 1000;
  TokenCount l_max = 1024;
  TokenCount g_max = 1024;
  std::vector<TaskSpec> tasks;

  void validate() const;
};

inline constexpr int kTopicsPerTask = 8;

// Eight tasks over six applications (MT x2, GC, TD, CT x2, BF, CC).
std::vector<TaskSpec> default_tasks();

// Pearson correlation of (UIL, G) implied by the unclipped lognormal marginal
// and the linear law.
double implied_pearson(const TaskSpec& spec);

// Poisson arrivals at `rate`, tasks drawn by share.
Trace gen_trace(const WorkloadConfig& config, uint64_t seed);

// `n` requests of a single task with arrival time 0 and ids starting at
// `first_id`.
Trace gen_task_samples(const TaskSpec& spec, int64_t n, TokenCount l_max,
                       TokenCount g_max, uint64_t seed, RequestId first_id = 0);

// `per_task` requests of every task, concatenated in task order.
Trace gen_task_corpus(const std::vector<TaskSpec>& tasks, int64_t per_task,
                      TokenCount l_max, TokenCount g_max, uint64_t seed);

// Per-task seeded disjoint partitions of sizes train_n and test_n.
std::pair<Trace, Trace> split_trace(const Trace& trace, size_t train_n, size_t test_n,
                                    uint64_t seed);

double pearson(const std::vector<double>& x, const std::vector<double>& y);

void to_json(nlohmann::json& j, const TaskSpec& t);
void from_json(const nlohmann::json& j, TaskSpec& t);
WorkloadConfig parse_workload_config(const nlohmann::json& j);

// JSONL trace files, one record per line sorted by arrival_s.
std::string trace_to_jsonl(const Trace& trace);
void save_trace(const Trace& trace, const std::string& path);
Trace load_trace(const std::string& path);

}  // namespace magnus
