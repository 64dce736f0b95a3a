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

#include "predictor/embedding.h"

#include <glog/logging.h>
#include <httplib.h>

#include <cmath>
#include <cctype>

#include <json.hpp>

#include "core/types.h"

namespace magnus {

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (char c : bytes) {
    h ^= static_cast<uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

namespace {

std::vector<std::string_view> split_whitespace(std::string_view text) {
  std::vector<std::string_view> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) {
      ++i;
    }
    size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) {
      ++j;
    }
    if (j > i) tokens.push_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

void add_gram(std::span<const std::string_view> words, Embedding& out) {
  std::string gram;
  for (size_t w = 0; w < words.size(); ++w) {
    if (w > 0) gram.push_back(' ');
    gram.append(words[w]);
  }
  const uint64_t h = fnv1a64(gram);
  out[h % kEmbeddingDim] += (h >> 63) ? -1.0f : 1.0f;
}

}  // namespace

Embedding HashingEmbedder::embed_text(std::string_view text) {
  Embedding out(kEmbeddingDim, 0.0f);
  const auto tokens = split_whitespace(text);
  if (tokens.empty()) return out;
  const std::span<const std::string_view> all(tokens);
  if (tokens.size() < 3) {
    add_gram(all, out);
  } else {
    for (size_t i = 0; i + 3 <= tokens.size(); ++i) {
      add_gram(all.subspan(i, 3), out);
    }
  }
  double norm = 0.0;
  for (float x : out) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (float& x : out) x = static_cast<float>(x / norm);
  }
  return out;
}

std::vector<Embedding> HashingEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_text(t));
  return out;
}

HttpEmbedder::HttpEmbedder(std::string host, int port,
                           std::chrono::milliseconds timeout)
    : host_(std::move(host)), port_(port), timeout_(timeout) {}

std::vector<Embedding> HttpEmbedder::embed_batch(
    const std::vector<std::string>& texts) const {
  auto fallback = [&](const std::string& why) {
    ++*fallbacks_;
    LOG(WARNING) << "embedding service " << host_ << ":" << port_
                 << " unavailable (" << why << "); using local hasher";
    return HashingEmbedder{}.embed_batch(texts);
  };

  httplib::Client client(host_, port_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const nlohmann::json body = {{"texts", texts}};
  auto res = client.Post("/embed", body.dump(), "application/json");
  if (!res) return fallback(httplib::to_string(res.error()));
  if (res->status != 200) {
    return fallback("HTTP status " + std::to_string(res->status));
  }
  try {
    const auto reply = nlohmann::json::parse(res->body);
    const auto& rows = reply.at("embeddings");
    if (!rows.is_array() || rows.size() != texts.size()) {
      return fallback("embedding count mismatch");
    }
    std::vector<Embedding> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
      auto e = row.get<Embedding>();
      if (e.size() != kEmbeddingDim) return fallback("wrong embedding width");
      out.push_back(std::move(e));
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    return fallback(std::string("malformed reply: ") + e.what());
  }
}

std::vector<double> compress(std::span<const float> v, size_t groups) {
  if (groups == 0 || v.size() % groups != 0) {
    throw ConfigError("compress: vector length " + std::to_string(v.size()) +
                      " is not divisible by " + std::to_string(groups));
  }
  const size_t group_size = v.size() / groups;
  const double scale = 1.0 / std::sqrt(static_cast<double>(group_size));
  std::vector<double> out(groups, 0.0);
  for (size_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    for (size_t i = g * group_size; i < (g + 1) * group_size; ++i) sum += v[i];
    out[g] = sum * scale;
  }
  return out;
}

}  // namespace magnus
