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

#include "sim/cost_model.h"

#include <cmath>

namespace magnus {

double serving_time(int64_t beta, TokenCount batch_len, TokenCount iterations,
                    const CostCoefficients& cost) {
  const auto b = static_cast<double>(beta);
  const auto len = static_cast<double>(batch_len);
  const auto g = static_cast<double>(iterations);
  // sum_{i=1}^{g} (L + i) = g*L + g(g+1)/2
  const double kv_reads = g * len + g * (g + 1.0) / 2.0;
  return cost.a0 + cost.a1 * b * len + g * cost.b0 + cost.b1 * b * kv_reads;
}

double serving_time(const Batch& batch, const CostCoefficients& cost) {
  return serving_time(static_cast<int64_t>(batch.size()), batch_length(batch),
                      batch_actual_gen_len(batch), cost);
}

std::optional<TokenCount> oom_check(int64_t beta, TokenCount batch_len,
                                    TokenCount batch_gen_len, const LlmProfile& profile) {
  const auto b = static_cast<double>(beta);
  const double peak = b * static_cast<double>(batch_len + batch_gen_len) * profile.delta;
  if (peak <= profile.theta) return std::nullopt;
  // Smallest g with b * (L + g) * delta > theta.
  const double limit = profile.theta / (b * profile.delta) - static_cast<double>(batch_len);
  auto g = static_cast<TokenCount>(std::floor(limit)) + 1;
  if (g < 1) g = 1;
  while (g > 1 && b * static_cast<double>(batch_len + g - 1) * profile.delta > profile.theta) {
    --g;
  }
  while (b * static_cast<double>(batch_len + g) * profile.delta <= profile.theta) ++g;
  return g;
}

std::optional<TokenCount> oom_check(const Batch& batch, const LlmProfile& profile) {
  return oom_check(static_cast<int64_t>(batch.size()), batch_length(batch),
                   batch_actual_gen_len(batch), profile);
}

bool serviceable(const Request& req, const LlmProfile& profile) {
  return static_cast<double>(req.request_len + 1) * profile.delta <= profile.theta;
}

}  // namespace magnus
