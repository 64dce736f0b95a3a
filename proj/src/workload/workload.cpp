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

#include "workload/workload.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "predictor/embedding.h"

namespace magnus {

namespace {

uint64_t mix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::array<const char*, 16> kSyllables = {
    "ka", "lo", "mi", "ne", "su", "ta", "ri", "po",
    "ve", "zu", "ga", "hi", "do", "fe", "ju", "qo"};
constexpr int kWordsPerTopic = 4;

std::string pseudo_word(const std::string& task_id, int topic, int index) {
  const uint64_t h = fnv1a64(task_id + "/" + std::to_string(topic) + "/" +
                             std::to_string(index));
  std::string word;
  for (int s = 0; s < 3; ++s) word += kSyllables[(h >> (4 * s)) & 0xF];
  return word;
}

// Topic values are evenly spaced and standardized to mean 0, variance 1.
double topic_value(int topic) {
  const double centre = (kTopicsPerTask - 1) / 2.0;
  double var = 0.0;
  for (int k = 0; k < kTopicsPerTask; ++k) var += (k - centre) * (k - centre);
  var /= kTopicsPerTask;
  return (topic - centre) / std::sqrt(var);
}

std::string user_text(const TaskSpec& spec, int topic, TokenCount uil, RequestId id,
                      uint64_t seed) {
  std::mt19937_64 rng(mix(seed ^ mix(fnv1a64(spec.task_id)) ^ mix(static_cast<uint64_t>(id))));
  std::uniform_int_distribution<int> pick(0, kWordsPerTopic - 1);
  std::array<std::string, kWordsPerTopic> vocab;
  for (int i = 0; i < kWordsPerTopic; ++i) vocab[i] = pseudo_word(spec.task_id, topic, i);
  std::string text = spec.keyword;
  for (TokenCount i = 1; i < uil; ++i) {
    text.push_back(' ');
    text += vocab[pick(rng)];
  }
  return text;
}

// Draws one request of `spec` from `rng`; texts come from (task, id, seed).
Request draw_request(const TaskSpec& spec, RequestId id, TokenCount l_max,
                     TokenCount g_max, uint64_t seed, std::mt19937_64& rng) {
  std::lognormal_distribution<double> marginal(spec.uil_mu, spec.uil_sigma);
  std::uniform_int_distribution<int> topic_pick(0, kTopicsPerTask - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  const TokenCount instr_len = spec.instruction_len();
  const TokenCount hi = std::min(spec.uil_max, l_max - instr_len);
  const TokenCount uil = std::clamp<TokenCount>(
      static_cast<TokenCount>(std::llround(marginal(rng))), spec.uil_min, hi);
  const int topic = topic_pick(rng);
  const double eps = normal(rng);
  const double noise = spec.noise_sigma * (std::sqrt(spec.semantic_share) * topic_value(topic) +
                                           std::sqrt(1.0 - spec.semantic_share) * eps);
  const TokenCount gen = std::clamp<TokenCount>(
      static_cast<TokenCount>(
          std::llround(spec.slope * static_cast<double>(uil) + spec.intercept + noise)),
      1, g_max);

  Request r;
  r.id = id;
  r.app_id = spec.app_id;
  r.task_id = spec.task_id;
  r.instruction = spec.instruction;
  r.user_input = user_text(spec, topic, uil, id, seed);
  r.user_input_len = uil;
  r.request_len = uil + instr_len;
  r.actual_gen_len = gen;
  return r;
}

TaskSpec make_task(std::string app, std::string task, std::string instruction,
                   std::string keyword, double median_uil, double slope,
                   double intercept, double noise_sigma, double target_rho) {
  TaskSpec t;
  t.app_id = std::move(app);
  t.task_id = std::move(task);
  t.instruction = std::move(instruction);
  t.keyword = std::move(keyword);
  t.uil_mu = std::log(median_uil);
  t.uil_sigma = 0.5;
  t.slope = slope;
  t.intercept = intercept;
  t.noise_sigma = noise_sigma;
  t.target_rho = target_rho;
  t.share = 1.0 / 8.0;
  return t;
}

}  // namespace

TokenCount TaskSpec::instruction_len() const {
  std::istringstream in(instruction);
  TokenCount n = 0;
  std::string word;
  while (in >> word) ++n;
  return n;
}

void WorkloadConfig::validate() const {
  if (!(rate > 0)) throw ConfigError("workload rate must be > 0");
  if (n_requests < 1) throw ConfigError("workload n_requests must be >= 1");
  if (l_max < 2 || g_max < 1) throw ConfigError("workload l_max/g_max out of range");
  if (tasks.empty()) throw ConfigError("workload has no tasks");
  double total = 0.0;
  for (const auto& t : tasks) {
    if (t.task_id.empty()) throw ConfigError("task_id must be non-empty");
    if (!(t.share >= 0)) throw ConfigError("task share must be >= 0");
    if (!(t.uil_sigma >= 0) || !(t.noise_sigma >= 0)) {
      throw ConfigError("task " + t.task_id + ": sigmas must be >= 0");
    }
    if (t.semantic_share < 0 || t.semantic_share > 1) {
      throw ConfigError("task " + t.task_id + ": semantic_share must be in [0, 1]");
    }
    if (t.uil_min < 1 || t.uil_min > t.uil_max ||
        t.uil_min + t.instruction_len() > l_max) {
      throw ConfigError("task " + t.task_id + ": user input clip range is empty");
    }
    total += t.share;
  }
  if (std::abs(total - 1.0) > 1e-6) {
    throw ConfigError("task shares must sum to 1 (got " + std::to_string(total) + ")");
  }
}

std::vector<TaskSpec> default_tasks() {
  // Targets loosely follow the observed strong length correlations; the
  // slopes encode the per-task length relationships (C++->Python shrinks,
  // code commenting grows, bug fixing keeps length).
  return {
      make_task("MT", "mt-en-de", "Translate the following English text into German :",
                "english", 50, 1.10, 3, 6, 0.985),
      make_task("MT", "mt-de-en", "Translate the following German text into English :",
                "deutsch", 55, 1.15, 2, 7, 0.983),
      make_task("GC", "gc", "Correct the grammatical errors in the following sentence :",
                "sentence", 30, 1.00, 1, 4, 0.975),
      make_task("TD", "td", "Rewrite the following toxic text in a polite way :",
                "toxic", 25, 0.95, 0, 5, 0.94),
      make_task("CT", "ct-cpp-py", "Translate the following C++ code into Python :",
                "cpp", 200, 0.70, 5, 20, 0.96),
      make_task("CT", "ct-py-cpp", "Translate the following Python code into C++ :",
                "python", 150, 1.40, 10, 25, 0.97),
      make_task("BF", "bf", "Fix the bug in the following code :", "buggy", 180, 1.00,
                2, 15, 0.985),
      make_task("CC", "cc", "Add comments to the following code :", "uncommented", 120,
                1.60, 20, 25, 0.97),
  };
}

double implied_pearson(const TaskSpec& spec) {
  const double s2 = spec.uil_sigma * spec.uil_sigma;
  const double var_u = (std::exp(s2) - 1.0) * std::exp(2.0 * spec.uil_mu + s2);
  const double cov = spec.slope * var_u;
  const double var_g = spec.slope * spec.slope * var_u + spec.noise_sigma * spec.noise_sigma;
  if (var_u <= 0.0 || var_g <= 0.0) return 0.0;
  return cov / std::sqrt(var_u * var_g);
}

Trace gen_trace(const WorkloadConfig& config, uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(mix(seed));
  std::exponential_distribution<double> gap(config.rate);
  std::vector<double> weights;
  for (const auto& t : config.tasks) weights.push_back(t.share);
  std::discrete_distribution<size_t> task_pick(weights.begin(), weights.end());

  Trace trace;
  trace.reserve(static_cast<size_t>(config.n_requests));
  double now = 0.0;
  for (int64_t i = 0; i < config.n_requests; ++i) {
    now += gap(rng);
    const auto& spec = config.tasks[task_pick(rng)];
    Request r = draw_request(spec, i, config.l_max, config.g_max, seed, rng);
    r.arrival_time = now;
    trace.push_back(std::move(r));
  }
  return trace;
}

Trace gen_task_samples(const TaskSpec& spec, int64_t n, TokenCount l_max,
                       TokenCount g_max, uint64_t seed, RequestId first_id) {
  std::mt19937_64 rng(mix(seed ^ mix(fnv1a64(spec.task_id))));
  Trace out;
  out.reserve(static_cast<size_t>(std::max<int64_t>(n, 0)));
  for (int64_t i = 0; i < n; ++i) {
    out.push_back(draw_request(spec, first_id + i, l_max, g_max, seed, rng));
  }
  return out;
}

Trace gen_task_corpus(const std::vector<TaskSpec>& tasks, int64_t per_task,
                      TokenCount l_max, TokenCount g_max, uint64_t seed) {
  Trace out;
  RequestId next = 0;
  for (const auto& spec : tasks) {
    auto part = gen_task_samples(spec, per_task, l_max, g_max, seed, next);
    next += per_task;
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

std::pair<Trace, Trace> split_trace(const Trace& trace, size_t train_n, size_t test_n,
                                    uint64_t seed) {
  std::map<std::string, std::vector<size_t>> by_task;
  for (size_t i = 0; i < trace.size(); ++i) by_task[trace[i].task_id].push_back(i);
  Trace train;
  Trace test;
  for (auto& [task, idx] : by_task) {
    if (idx.size() < train_n + test_n) {
      throw ConfigError("task " + task + " has " + std::to_string(idx.size()) +
                        " records, need " + std::to_string(train_n + test_n));
    }
    std::mt19937_64 rng(mix(seed ^ mix(fnv1a64(task))));
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < train_n; ++i) train.push_back(trace[idx[i]]);
    for (size_t i = train_n; i < train_n + test_n; ++i) test.push_back(trace[idx[i]]);
  }
  return {std::move(train), std::move(test)};
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw ContractViolation("pearson needs two equal-length samples of size >= 2");
  }
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

void to_json(nlohmann::json& j, const TaskSpec& t) {
  j = nlohmann::json{{"app_id", t.app_id},
                     {"task_id", t.task_id},
                     {"instruction", t.instruction},
                     {"keyword", t.keyword},
                     {"uil_mu", t.uil_mu},
                     {"uil_sigma", t.uil_sigma},
                     {"uil_min", t.uil_min},
                     {"uil_max", t.uil_max},
                     {"slope", t.slope},
                     {"intercept", t.intercept},
                     {"noise_sigma", t.noise_sigma},
                     {"semantic_share", t.semantic_share},
                     {"target_rho", t.target_rho},
                     {"share", t.share}};
}

void from_json(const nlohmann::json& j, TaskSpec& t) {
  t = TaskSpec{};
  t.app_id = j.at("app_id").get<std::string>();
  t.task_id = j.at("task_id").get<std::string>();
  t.instruction = j.value("instruction", std::string{});
  t.keyword = j.value("keyword", t.task_id);
  t.uil_mu = j.value("uil_mu", t.uil_mu);
  t.uil_sigma = j.value("uil_sigma", t.uil_sigma);
  t.uil_min = j.value("uil_min", t.uil_min);
  t.uil_max = j.value("uil_max", t.uil_max);
  t.slope = j.value("slope", t.slope);
  t.intercept = j.value("intercept", t.intercept);
  t.noise_sigma = j.value("noise_sigma", t.noise_sigma);
  t.semantic_share = j.value("semantic_share", t.semantic_share);
  t.target_rho = j.value("target_rho", t.target_rho);
  t.share = j.value("share", t.share);
}

WorkloadConfig parse_workload_config(const nlohmann::json& j) {
  WorkloadConfig c;
  try {
    c.rate = j.value("rate", c.rate);
    c.n_requests = j.value("n_requests", c.n_requests);
    c.l_max = j.value("l_max", c.l_max);
    c.g_max = j.value("g_max", c.g_max);
    if (j.contains("tasks")) {
      c.tasks = j.at("tasks").get<std::vector<TaskSpec>>();
    } else {
      c.tasks = default_tasks();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid workload config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string trace_to_jsonl(const Trace& trace) {
  std::string out;
  for (const auto& r : trace) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["app_id"] = r.app_id;
    j["task_id"] = r.task_id;
    j["instruction"] = r.instruction;
    j["user_input"] = r.user_input;
    j["uil"] = r.user_input_len;
    j["req_len"] = r.request_len;
    j["gen_len"] = r.actual_gen_len;
    j["arrival_s"] = r.arrival_time;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << trace_to_jsonl(trace);
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open trace file: " + path);
  Trace trace;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Request r;
      r.id = j.at("id").get<RequestId>();
      r.app_id = j.at("app_id").get<std::string>();
      r.task_id = j.at("task_id").get<std::string>();
      r.instruction = j.at("instruction").get<std::string>();
      r.user_input = j.at("user_input").get<std::string>();
      r.user_input_len = j.at("uil").get<TokenCount>();
      r.request_len = j.at("req_len").get<TokenCount>();
      r.actual_gen_len = j.at("gen_len").get<TokenCount>();
      r.arrival_time = j.at("arrival_s").get<double>();
      if (r.request_len < 1 || r.actual_gen_len < 1 ||
          r.user_input_len > r.request_len || r.user_input_len < 0) {
        throw ConfigError("lengths out of range");
      }
      if (!trace.empty() && r.arrival_time < trace.back().arrival_time) {
        throw ConfigError("records are not sorted by arrival_s");
      }
      trace.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

}  // namespace magnus
