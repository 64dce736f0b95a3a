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

#include <chrono>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace magnus {

inline constexpr size_t kEmbeddingDim = 768;
inline constexpr size_t kAppGroups = 4;
inline constexpr size_t kUserGroups = 16;

using Embedding = std::vector<float>;

// Source of sentence embeddings for the generation-length predictor.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // One embedding of kEmbeddingDim entries per input text, in order.
  virtual std::vector<Embedding> embed_batch(
      const std::vector<std::string>& texts) const = 0;

  Embedding embed(const std::string& text) const {
    return embed_batch({text}).front();
  }
};

uint64_t fnv1a64(std::string_view bytes);

// Deterministic local embedding. Whitespace tokens are grouped into sliding
// word trigrams (a text with fewer than three tokens forms a single gram);
// each gram is hashed with FNV-1a 64, adds +/-1 at index hash % 768 with the
// sign taken from bit 63, and the result is L2-normalized. Empty text maps to
// the zero vector.
class HashingEmbedder final : public EmbeddingProvider {
 public:
  std::vector<Embedding> embed_batch(
      const std::vector<std::string>& texts) const override;

  static Embedding embed_text(std::string_view text);
};

// Client for an external embedding service:
//   POST {base_url}/embed  {"texts": [...]}  ->  {"embeddings": [[...], ...]}
// Any transport error, timeout, or malformed reply is logged and the request
// falls back to HashingEmbedder.
class HttpEmbedder final : public EmbeddingProvider {
 public:
  HttpEmbedder(std::string host, int port,
               std::chrono::milliseconds timeout = std::chrono::milliseconds(2000));

  std::vector<Embedding> embed_batch(
      const std::vector<std::string>& texts) const override;

  // Number of calls that fell back to the local hasher.
  int64_t fallback_count() const { return *fallbacks_; }

 private:
  std::string host_;
  int port_;
  std::chrono::milliseconds timeout_;
  std::shared_ptr<int64_t> fallbacks_ = std::make_shared<int64_t>(0);
};

// Splits `v` into `groups` equal contiguous groups and returns each group's
// sum divided by sqrt(group size). Throws ConfigError when the length is not
// divisible by `groups`.
std::vector<double> compress(std::span<const float> v, size_t groups);

}  // namespace magnus
