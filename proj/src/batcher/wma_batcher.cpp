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

#include "batcher/wma_batcher.h"

#include <algorithm>
#include <limits>

namespace magnus {

std::string_view to_string(WaitBounds bounds) {
  return bounds == WaitBounds::kVerbatim ? "verbatim" : "exclusive";
}

WaitBounds parse_wait_bounds(std::string_view name) {
  if (name == "verbatim") return WaitBounds::kVerbatim;
  if (name == "exclusive") return WaitBounds::kExclusive;
  throw ConfigError("wait_bounds must be 'verbatim' or 'exclusive', got '" +
                    std::string(name) + "'");
}

void BatcherConfig::validate() const {
  if (!(phi > 0)) throw ConfigError("batcher.phi must be > 0");
  if (max_batch_size < 0) throw ConfigError("max batch size must be >= 0");
}

int64_t wma_gen(const Request& p, TokenCount batch_len) {
  if (batch_len < p.request_len) {
    throw ContractViolation("wma_gen: batch length below request length");
  }
  return p.predicted_or_throw() * (batch_len - p.request_len);
}

int64_t wma_wait(const Request& p, TokenCount batch_len, TokenCount batch_gen_len,
                 WaitBounds bounds) {
  const TokenCount g = p.predicted_or_throw();
  if (batch_gen_len < g) {
    throw ContractViolation("wma_wait: batch generation length below request's");
  }
  const TokenCount lo = bounds == WaitBounds::kVerbatim ? g : g + 1;
  const TokenCount hi = batch_gen_len;
  if (hi < lo) return 0;
  const int64_t terms = hi - lo + 1;
  // sum_{g=lo}^{hi} g = (lo + hi) * terms / 2, always integral.
  return terms * batch_len + (lo + hi) * terms / 2;
}

namespace {

// WMA and memory of `batch` with `extra` appended, without copying requests.
struct Candidate {
  int64_t wma = 0;
  double mem = 0.0;
};

Candidate evaluate_with(const Batch& batch, const Request* extra, WaitBounds bounds,
                        double delta) {
  if (batch.empty() && !extra) throw ContractViolation("WMA of an empty batch");
  TokenCount len = extra ? extra->request_len : 0;
  TokenCount gen = extra ? extra->predicted_or_throw() : 0;
  for (const auto& p : batch.requests) {
    len = std::max(len, p.request_len);
    gen = std::max(gen, p.predicted_or_throw());
  }
  int64_t worst = 0;
  for (const auto& p : batch.requests) {
    worst = std::max(worst, wma_gen(p, len) + wma_wait(p, len, gen, bounds));
  }
  if (extra) {
    worst = std::max(worst, wma_gen(*extra, len) + wma_wait(*extra, len, gen, bounds));
  }
  const auto beta = static_cast<double>(batch.size() + (extra ? 1 : 0));
  return {worst, beta * static_cast<double>(len + gen) * delta};
}

}  // namespace

int64_t wma_batch(const Batch& batch, WaitBounds bounds) {
  return evaluate_with(batch, nullptr, bounds, 1.0).wma;
}

double mem_estimate(const Batch& batch, double delta) {
  return evaluate_with(batch, nullptr, WaitBounds::kExclusive, delta).mem;
}

void BatchQueue::push(Batch batch) {
  auto pos = std::upper_bound(
      batches_.begin(), batches_.end(), batch, [](const Batch& a, const Batch& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.id < b.id;
      });
  batches_.insert(pos, std::move(batch));
}

Batch BatchQueue::take(size_t index) {
  Batch out = std::move(batches_.at(index));
  batches_.erase(batches_.begin() + static_cast<std::ptrdiff_t>(index));
  return out;
}

std::optional<size_t> BatchQueue::find(BatchId id) const {
  for (size_t i = 0; i < batches_.size(); ++i) {
    if (batches_[i].id == id) return i;
  }
  return std::nullopt;
}

Placement insert_request(BatchQueue& queue, Request p, const LlmProfile& profile,
                         const BatcherConfig& config, double now) {
  p.predicted_or_throw();
  int64_t best_wma = std::numeric_limits<int64_t>::max();
  std::optional<size_t> best;
  for (size_t i = 0; i < queue.size(); ++i) {
    const Batch& b = queue.at(i);
    if (!b.insertable) continue;
    if (config.max_batch_size > 0 &&
        static_cast<int64_t>(b.size()) >= config.max_batch_size) {
      continue;
    }
    const auto c = evaluate_with(b, &p, config.wait_bounds, profile.delta);
    if (c.mem <= profile.theta && c.wma < best_wma) {
      best_wma = c.wma;
      best = i;
    }
  }
  if (best && static_cast<double>(best_wma) < config.phi) {
    Batch& b = queue.at(*best);
    b.requests.push_back(std::move(p));
    return {b.id, true, best_wma};
  }
  Batch fresh;
  fresh.id = queue.next_batch_id();
  fresh.created_at = now;
  fresh.requests.push_back(std::move(p));
  const BatchId id = fresh.id;
  queue.push(std::move(fresh));
  return {id, false, 0};
}

std::pair<Batch, Batch> split_on_oom(const Batch& batch, BatchId first_id,
                                     BatchId second_id) {
  if (batch.size() < 2) {
    throw ContractViolation("split_on_oom: batch " + std::to_string(batch.id) +
                            " has a single request and cannot be split");
  }
  const size_t head = (batch.size() + 1) / 2;
  Batch first;
  Batch second;
  first.id = first_id;
  second.id = second_id;
  first.created_at = second.created_at = batch.created_at;
  first.insertable = second.insertable = false;
  first.requests.assign(batch.requests.begin(),
                        batch.requests.begin() + static_cast<std::ptrdiff_t>(head));
  second.requests.assign(batch.requests.begin() + static_cast<std::ptrdiff_t>(head),
                         batch.requests.end());
  return {std::move(first), std::move(second)};
}

}  // namespace magnus
