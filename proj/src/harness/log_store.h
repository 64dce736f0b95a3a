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

#include <filesystem>
#include <string>
#include <vector>

#include "sim/engine.h"

namespace magnus {

// Contents of a run log. The on-disk form is one JSONL file per run whose
// lines carry a "type" of run, batch, request, oom, retrain or rejection.
struct RunLog {
  SimConfig config;
  LlmProfile profile;
  std::vector<RequestRecord> requests;
  std::vector<BatchRecord> batches;
  std::vector<OomEvent> ooms;
  std::vector<RetrainEvent> retrains;
  std::vector<Rejection> rejections;
};

inline constexpr const char* kRunLogName = "log.jsonl";

std::string run_log_to_jsonl(const SimResult& result, const LlmProfile& profile);
void write_run_log(const std::filesystem::path& dir, const SimResult& result,
                   const LlmProfile& profile);
RunLog read_run_log(const std::filesystem::path& file);

// Recomputes the continuous-learning collection decisions of a magnus run
// from its logs: which requests and batches each retrain would admit.
// Training sizes are not reproduced (they depend on the initial model).
std::vector<RetrainEvent> replay_retraining(const RunLog& log);

}  // namespace magnus
