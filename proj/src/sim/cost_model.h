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

#include <optional>

#include "core/types.h"

namespace magnus {

// Simulated serving time of a padded batch that runs `iterations` decode
// steps:
//   a0 + a1*beta*L + sum_{g=1}^{iterations} (b0 + b1*beta*(L + g))
double serving_time(int64_t beta, TokenCount batch_len, TokenCount iterations,
                    const CostCoefficients& cost);

// Full serving time of `batch` using actual generation lengths.
double serving_time(const Batch& batch, const CostCoefficients& cost);

// First decode iteration g in [1, G(B)] whose KV footprint
// beta * (L(B) + g) * delta exceeds theta, using actual lengths.
std::optional<TokenCount> oom_check(int64_t beta, TokenCount batch_len,
                                    TokenCount batch_gen_len, const LlmProfile& profile);
std::optional<TokenCount> oom_check(const Batch& batch, const LlmProfile& profile);

// A request can never be served if its prompt plus one generated token
// exceeds the KV memory on its own.
bool serviceable(const Request& req, const LlmProfile& profile);

// Duration of one continuous-batching decode step whose active requests
// together read `kv_reads` cached entries.
inline double ccb_decode_step(double kv_reads, const CostCoefficients& cost) {
  return cost.b0 + cost.b1 * kv_reads;
}

// Initialization stall caused by a request joining a running instance.
inline double ccb_join_stall(TokenCount request_len, const CostCoefficients& cost) {
  return cost.a0 + cost.a1 * static_cast<double>(request_len);
}

}  // namespace magnus
