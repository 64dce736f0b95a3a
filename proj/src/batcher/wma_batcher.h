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
#include <string_view>
#include <utility>
#include <vector>

#include "core/types.h"

namespace magnus {

// Summation bounds for the waiting-phase WMA term.
//   kVerbatim:  g runs from G'(p) to G(B) inclusive.
//   kExclusive: g runs from G'(p)+1 to G(B), i.e. strictly post-EOS steps.
enum class WaitBounds { kVerbatim, kExclusive };

std::string_view to_string(WaitBounds bounds);
WaitBounds parse_wait_bounds(std::string_view name);

struct BatcherConfig {
  double phi = 50000.0;  // WMA threshold
  WaitBounds wait_bounds = WaitBounds::kVerbatim;
  // Upper bound on batch size; 0 means unbounded.
  int64_t max_batch_size = 0;

  void validate() const;
};

// Pad-token reads before EOS: G'(p) * (L_B - L(p)).
int64_t wma_gen(const Request& p, TokenCount batch_len);

// Reads during request waiting: sum over g of (g + L_B).
int64_t wma_wait(const Request& p, TokenCount batch_len, TokenCount batch_gen_len,
                 WaitBounds bounds);

// Max over members of wma_gen + wma_wait, using predicted lengths.
int64_t wma_batch(const Batch& batch, WaitBounds bounds);

// Estimated KV memory beta * (L(B) + G'(B)) * delta.
double mem_estimate(const Batch& batch, double delta);

// Batches waiting for an instance, ordered by (created_at, id).
class BatchQueue {
 public:
  const std::vector<Batch>& batches() const { return batches_; }
  size_t size() const { return batches_.size(); }
  bool empty() const { return batches_.empty(); }

  // Inserts keeping (created_at, id) order.
  void push(Batch batch);
  Batch& at(size_t index) { return batches_.at(index); }
  Batch take(size_t index);
  std::optional<size_t> find(BatchId id) const;

  BatchId next_batch_id() { return next_id_++; }

 private:
  std::vector<Batch> batches_;
  BatchId next_id_ = 0;
};

struct Placement {
  BatchId batch_id = 0;
  bool joined = false;  // false: a new singleton batch was created
  int64_t wma = 0;      // min WMA found (0 for a fresh batch)
};

// WMA-directed insertion: joins the insertable batch whose WMA after
// insertion is smallest among those whose estimated memory stays within
// theta, provided that WMA is below phi; otherwise opens a new batch at the
// back of the queue. Equal WMA goes to the earliest-created batch.
Placement insert_request(BatchQueue& queue, Request p, const LlmProfile& profile,
                         const BatcherConfig& config, double now);

// Splits an OOM batch into its first ceil(n/2) and remaining requests, both
// sealed and keeping the parent's created_at. Throws ContractViolation for a
// singleton batch.
std::pair<Batch, Batch> split_on_oom(const Batch& batch, BatchId first_id,
                                     BatchId second_id);

}  // namespace magnus
