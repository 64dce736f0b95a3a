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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "batcher/wma_batcher.h"
#include "core/types.h"
#include "estimator/knn_estimator.h"
#include "harness/metrics.h"
#include "predictor/genlen_predictor.h"
#include "sim/cost_model.h"
#include "sim/engine.h"
#include "workload/workload.h"

namespace magnus {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

Request request(RequestId id, TokenCount len, TokenCount gen, TokenCount predicted,
                double arrival = 0.0) {
  Request r;
  r.id = id;
  r.app_id = "app";
  r.task_id = "task";
  r.user_input_len = len;
  r.request_len = len;
  r.actual_gen_len = gen;
  r.predicted_gen_len = predicted;
  r.arrival_time = arrival;
  return r;
}

// ---- 1 -------------------------------------------------------------------

// Walks the padded batch iteration by iteration and counts reads that
// contribute nothing: pad entries before the request's EOS, and every entry
// read while it waits for the batch to finish.
int64_t wasted_reads(const Batch& b, const Request& p, WaitBounds bounds) {
  TokenCount len_b = 0;
  TokenCount gen_b = 0;
  for (const auto& r : b.requests) {
    len_b = std::max(len_b, r.request_len);
    gen_b = std::max(gen_b, *r.predicted_gen_len);
  }
  const TokenCount g_p = *p.predicted_gen_len;
  const TokenCount wait_from = bounds == WaitBounds::kVerbatim ? g_p : g_p + 1;
  int64_t total = 0;
  for (TokenCount g = 1; g <= gen_b; ++g) {
    if (g <= g_p) {
      for (TokenCount pos = p.request_len; pos < len_b; ++pos) ++total;
    }
    if (g >= wait_from) {
      for (TokenCount pos = 0; pos < g + len_b; ++pos) ++total;
    }
  }
  return total;
}

Outcome wma_oracle() {
  std::mt19937_64 rng(20240601);
  std::uniform_int_distribution<int> beta(1, 8);
  std::uniform_int_distribution<TokenCount> len(1, 64);
  int mismatches = 0;
  int64_t checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Batch b;
    const int n = beta(rng);
    for (int i = 0; i < n; ++i) b.requests.push_back(request(i, len(rng), 0, len(rng)));
    TokenCount len_b = 0;
    TokenCount gen_b = 0;
    for (const auto& r : b.requests) {
      len_b = std::max(len_b, r.request_len);
      gen_b = std::max(gen_b, *r.predicted_gen_len);
    }
    for (auto bounds : {WaitBounds::kVerbatim, WaitBounds::kExclusive}) {
      int64_t worst = 0;
      for (const auto& p : b.requests) {
        const int64_t closed = wma_gen(p, len_b) + wma_wait(p, len_b, gen_b, bounds);
        const int64_t loop = wasted_reads(b, p, bounds);
        worst = std::max(worst, loop);
        mismatches += closed != loop;
        ++checked;
      }
      mismatches += wma_batch(b, bounds) != worst;
    }
  }
  return {mismatches == 0, std::to_string(checked) + " request terms, " +
                               std::to_string(mismatches) + " mismatches"};
}

// ---- 2 -------------------------------------------------------------------

Outcome static_size() {
  LlmProfile p;
  p.theta = 14336;
  p.delta = 1;
  p.l_max = 1024;
  p.g_max = 1024;
  const int64_t k = static_batch_size(p);
  return {k == 7, "static_batch_size = " + std::to_string(k)};
}

// ---- 3 -------------------------------------------------------------------

double makespan(const SimResult& r) {
  double first = std::numeric_limits<double>::infinity();
  double last = 0.0;
  for (const auto& x : r.requests) {
    first = std::min(first, x.arrival_s);
    last = std::max(last, x.finish_s);
  }
  return last - first;
}

Outcome short_long_mix() {
  Trace trace;
  for (int i = 0; i < 21; ++i) {
    const TokenCount n = i % 7 == 3 ? 1000 : 10;
    auto r = request(i, n, n, 0);
    r.predicted_gen_len.reset();  // UILO predicts G' = UIL = G here
    trace.push_back(r);
  }
  SimConfig c;
  c.instances = 1;
  c.predictor_mode = PredictorMode::kUilo;
  c.continuous_learning = false;
  c.policy = Policy::kMagnus;
  const auto magnus = Simulator(c, LlmProfile{}).run(trace);
  c.policy = Policy::kVs;
  const auto vs = Simulator(c, LlmProfile{}).run(trace);

  std::multiset<int64_t> sizes;
  for (const auto& b : magnus.batches) sizes.insert(b.size);
  const bool grouped = sizes == std::multiset<int64_t>{3, 18};
  const double ratio = makespan(magnus) / makespan(vs);
  return {grouped && ratio <= 0.5 && magnus.requests.size() == 21,
          "magnus batches {" + [&] {
            std::string s;
            for (auto x : sizes) s += (s.empty() ? "" : ",") + std::to_string(x);
            return s;
          }() + "}, makespan " + fmt("%.2f", makespan(magnus)) + " s vs " +
              fmt("%.2f", makespan(vs)) + " s (ratio " + fmt("%.3f", ratio) + ")"};
}

// ---- 4 -------------------------------------------------------------------

struct Corpus {
  Trace train;
  Trace test;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    const auto all = gen_task_corpus(default_tasks(), 2500, 1024, 1024, 42);
    auto [train, test] = split_trace(all, 2000, 500, 7);
    return Corpus{std::move(train), std::move(test)};
  }();
  return c;
}

Outcome ablation() {
  const auto& data = corpus();
  PredictorOptions opts;
  opts.seed = 1;
  std::map<PredictorMode, double> err;
  for (auto mode : {PredictorMode::kUilo, PredictorMode::kInst, PredictorMode::kUsin}) {
    err[mode] = rmse(GenLenPredictor::train(data.train, mode, opts), data.test);
  }
  const double uilo = err[PredictorMode::kUilo];
  const double inst = err[PredictorMode::kInst];
  const double usin = err[PredictorMode::kUsin];
  return {usin <= inst && inst <= uilo && usin <= 0.7 * uilo,
          "RMSE UILO " + fmt("%.3f", uilo) + ", INST " + fmt("%.3f", inst) + ", USIN " +
              fmt("%.3f", usin) + " (USIN/UILO " + fmt("%.3f", usin / uilo) + ")"};
}

// ---- 5 -------------------------------------------------------------------

constexpr int kSweepTrees = 20;
constexpr int64_t kSweepRequests = 4000;

std::shared_ptr<const GenLenPredictor> sweep_predictor() {
  static const auto model = [] {
    PredictorOptions opts;
    opts.seed = 3;
    opts.forest.n_trees = kSweepTrees;
    return std::make_shared<const GenLenPredictor>(
        GenLenPredictor::train(corpus().train, PredictorMode::kUsin, opts));
  }();
  return model;
}

Trace sweep_trace(double rate, uint64_t seed, int64_t n = kSweepRequests) {
  WorkloadConfig w;
  w.rate = rate;
  w.n_requests = n;
  w.tasks = default_tasks();
  return gen_trace(w, seed);
}

double throughput(Policy policy, const Trace& trace, uint64_t seed) {
  SimConfig c;
  c.policy = policy;
  c.instances = 7;
  c.seed = seed;
  auto predictor = uses_predictor(policy) ? sweep_predictor() : nullptr;
  return summarize(Simulator(c, LlmProfile{}, predictor).run(trace)).request_throughput;
}

Outcome throughput_order() {
  sweep_predictor();
  const auto t0 = Clock::now();
  int ok = 0;
  int total = 0;
  double min_gain = std::numeric_limits<double>::infinity();
  std::string failures;
  for (double rate : {16.0, 24.0, 32.0}) {
    for (uint64_t seed = 1; seed <= 5; ++seed) {
      const auto trace = sweep_trace(rate, seed);
      const double vs = throughput(Policy::kVs, trace, seed);
      const double ccb = throughput(Policy::kCcb, trace, seed);
      const double mag = throughput(Policy::kMagnus, trace, seed);
      const bool good = mag > ccb && ccb > vs && mag >= 1.5 * vs;
      min_gain = std::min(min_gain, mag / vs);
      ++total;
      ok += good;
      if (!good) {
        failures += " [rate " + fmt("%.0f", rate) + " seed " + std::to_string(seed) +
                    ": vs " + fmt("%.3f", vs) + " ccb " + fmt("%.3f", ccb) + " magnus " +
                    fmt("%.3f", mag) + "]";
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {ok == total && elapsed < 120.0,
          std::to_string(ok) + "/" + std::to_string(total) +
              " runs ordered, min magnus/vs " + fmt("%.2f", min_gain) + ", sweep " +
              fmt("%.1f", elapsed) + " s" + failures};
}

// ---- 6 -------------------------------------------------------------------

// Below saturation, so both dispatchers keep up with arrivals and the queue
// still holds several batches at a time.
constexpr double kHrrnRate = 6.0;
constexpr int64_t kHrrnRequests = 8000;

Outcome hrrn_vs_fifo() {
  const auto t0 = Clock::now();
  int better = 0;
  int same_tp = 0;
  double worst_tp_gap = 0.0;
  double mean_gain = 0.0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const auto trace = sweep_trace(kHrrnRate, 100 + seed, kHrrnRequests);
    SimConfig c;
    c.instances = 7;
    c.seed = seed;
    c.continuous_learning = false;  // identical batching; only dispatch differs
    c.policy = Policy::kAbp;
    const auto abp = summarize(Simulator(c, LlmProfile{}, sweep_predictor()).run(trace));
    c.policy = Policy::kMagnus;
    const auto mag = summarize(Simulator(c, LlmProfile{}, sweep_predictor()).run(trace));
    better += mag.avg_response_time_s <= abp.avg_response_time_s;
    const double gap =
        std::abs(mag.request_throughput - abp.request_throughput) / abp.request_throughput;
    worst_tp_gap = std::max(worst_tp_gap, gap);
    same_tp += gap <= 0.01;
    mean_gain += 1.0 - mag.avg_response_time_s / abp.avg_response_time_s;
  }
  const double elapsed = seconds_since(t0);
  return {better >= 18 && same_tp == 20 && elapsed < 180.0,
          "magnus avg RT <= abp on " + std::to_string(better) + "/20, mean RT reduction " +
              fmt("%.1f", 100.0 * mean_gain / 20.0) + "%, max throughput gap " +
              fmt("%.3f", 100.0 * worst_tp_gap) + "%, " + fmt("%.1f", elapsed) + " s"};
}

// ---- 7 -------------------------------------------------------------------

Outcome oom_split() {
  // UILO predicts G' = UIL = 20 while every request generates 150 tokens, so
  // the batcher packs eight requests that only fit for a few iterations.
  LlmProfile profile;
  profile.theta = 1000;
  Trace trace;
  for (int i = 0; i < 8; ++i) {
    auto r = request(i, 20, 150, 0);
    r.predicted_gen_len.reset();
    trace.push_back(r);
  }
  for (int i = 8; i < 13; ++i) {
    auto r = request(i, 30, 10 + i, 0, 50.0 + i);
    r.predicted_gen_len.reset();
    trace.push_back(r);
  }
  SimConfig c;
  c.policy = Policy::kMagnus;
  c.instances = 2;
  c.predictor_mode = PredictorMode::kUilo;
  const auto result = Simulator(c, profile).run(trace);

  bool ok = !result.ooms.empty();
  std::map<BatchId, BatchRecord> served;
  for (const auto& b : result.batches) served[b.id] = b;
  std::string detail;
  for (const auto& e : result.ooms) {
    ok = ok && e.first_size == (e.size + 1) / 2 && e.second_size == e.size / 2;
    for (BatchId child : {e.first_id, e.second_id}) {
      const auto it = served.find(child);
      ok = ok && it != served.end() && it->second.sealed_by_oom;
    }
    detail += " [" + std::to_string(e.size) + " -> " + std::to_string(e.first_size) + "/" +
              std::to_string(e.second_size) + "]";
  }
  std::set<RequestId> completed;
  for (const auto& r : result.requests) completed.insert(r.id);
  ok = ok && completed.size() == trace.size() && result.rejections.empty();
  return {ok, std::to_string(result.ooms.size()) + " OOM event(s)" + detail + ", " +
                  std::to_string(completed.size()) + "/" + std::to_string(trace.size()) +
                  " requests completed"};
}

// ---- 8 -------------------------------------------------------------------

std::vector<TimedBatch> cost_model_logs(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> beta(1, 16);
  std::uniform_int_distribution<TokenCount> len(16, 512);
  const CostCoefficients cost;
  std::vector<TimedBatch> out;
  for (size_t i = 0; i < n; ++i) {
    const int b = beta(rng);
    const TokenCount l = len(rng);
    const TokenCount g = len(rng);
    out.push_back({{double(b), double(l), double(g)}, serving_time(b, l, g, cost)});
  }
  return out;
}

Outcome estimator_accuracy() {
  const auto t0 = Clock::now();
  const KnnEstimator knn(cost_model_logs(500, 11), 5);
  std::vector<double> rel;
  for (const auto& ex : cost_model_logs(200, 12)) {
    rel.push_back(std::abs(knn.estimate(ex.features) - ex.serving_time_s) / ex.serving_time_s);
  }
  std::sort(rel.begin(), rel.end());
  const double median = (rel[99] + rel[100]) / 2.0;
  const double elapsed = seconds_since(t0);
  return {median <= 0.10 && elapsed < 10.0,
          "median relative error " + fmt("%.2f", 100.0 * median) + "%, " +
              fmt("%.2f", elapsed) + " s"};
}

// ---- 9 -------------------------------------------------------------------

Outcome continuous_learning() {
  auto tasks = default_tasks();
  const auto& data = corpus();
  PredictorOptions opts;
  opts.seed = 5;
  opts.forest.n_trees = 30;
  const auto before = GenLenPredictor::train(data.train, PredictorMode::kUsin, opts);

  // The first task's generation law shifts; its requests served afterwards,
  // mixed with traffic from an unchanged task, feed one retraining round.
  TaskSpec shifted = tasks[0];
  shifted.slope *= 1.8;
  shifted.intercept += 40.0;
  auto served = gen_task_samples(shifted, 600, 1024, 1024, 77, 1000000);
  const auto steady = gen_task_samples(tasks[2], 300, 1024, 1024, 79, 3000000);
  served.insert(served.end(), steady.begin(), steady.end());
  for (auto& r : served) r.predicted_gen_len = before.predict(r);
  std::vector<RequestId> collected;
  const auto after = before.continuous_learn(served, &collected);

  std::set<RequestId> expected;
  for (const auto& r : served) {
    const double e = std::abs(double(*r.predicted_gen_len - r.actual_gen_len));
    if (e > 10.0 && e > 0.1 * double(r.actual_gen_len)) expected.insert(r.id);
  }
  const bool pred_filter_exact =
      std::set<RequestId>(collected.begin(), collected.end()) == expected &&
      collected.size() == expected.size();

  const auto fresh = gen_task_samples(shifted, 500, 1024, 1024, 78, 2000000);
  const double pre = rmse(before, fresh);
  const double post = rmse(after, fresh);

  // Estimator filter: admitted logs are exactly those missing by > 2 s and
  // by > 20% of the actual time.
  const KnnEstimator knn(calibration_examples(LlmProfile{}), 5);
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> beta(1, 16);
  std::uniform_int_distribution<TokenCount> len(1, 1024);
  std::uniform_real_distribution<double> scale(0.5, 1.8);
  std::vector<BatchLog> logs;
  std::vector<size_t> want;
  for (size_t i = 0; i < 400; ++i) {
    BatchLog l{beta(rng), len(rng), len(rng), len(rng), 0.0};
    const BatchFeatures f{double(l.batch_size), double(l.batch_len),
                          double(l.actual_gen_len)};
    const double est = knn.estimate(f);
    l.actual_time_s = est * scale(rng);
    if (i % 10 == 0) l.actual_time_s = est + 2.0;  // exactly on the absolute bound
    const double e = std::abs(est - l.actual_time_s);
    if (e > 2.0 && e > 0.2 * l.actual_time_s) want.push_back(i);
    logs.push_back(l);
  }
  std::vector<size_t> got;
  knn.continuous_learn(logs, &got);
  const bool est_filter_exact = got == want;

  return {pred_filter_exact && est_filter_exact && post <= 0.8 * pre,
          "shifted-task RMSE " + fmt("%.2f", pre) + " -> " + fmt("%.2f", post) + " (" +
              fmt("%.1f", 100.0 * (1.0 - post / pre)) + "% lower), predictor filter " +
              (pred_filter_exact ? "exact" : "MISMATCH") + " (" +
              std::to_string(collected.size()) + "/" + std::to_string(served.size()) +
              " collected), estimator filter " +
              (est_filter_exact ? "exact" : "MISMATCH") + " (" + std::to_string(got.size()) +
              "/" + std::to_string(logs.size()) + " admitted)"};
}

// ---- 10 ------------------------------------------------------------------

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "magnus_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = MAGNUS_CLI_PATH;
  bool ok = true;
  for (const char* run : {"a", "b"}) {
    const fs::path d = dir / run;
    fs::create_directories(d);
    const std::string trace = (d / "trace.jsonl").string();
    ok = ok && shell(cli + " gen-workload --seed 17 --n 600 --rate 12 --out " + trace) == 0;
    for (const char* policy : {"vs", "ccb", "magnus"}) {
      ok = ok && shell(cli + " simulate --trace " + trace + " --policy " + policy +
                       " --seed 17 --rate 12 --out " + (d / (std::string(policy) + ".json")).string() +
                       " --log-dir " + (d / policy).string()) == 0;
    }
  }
  std::vector<std::string> files = {"trace.jsonl"};
  for (const char* policy : {"vs", "ccb", "magnus"}) {
    files.push_back(std::string(policy) + ".json");
    files.push_back(std::string(policy) + "/log.jsonl");
  }
  size_t identical = 0;
  for (const auto& f : files) {
    const auto a = slurp(dir / "a" / f);
    identical += !a.empty() && a == slurp(dir / "b" / f);
  }
  fs::remove_all(dir);
  ok = ok && identical == files.size();
  return {ok, std::to_string(identical) + "/" + std::to_string(files.size()) +
                  " files byte-identical across two runs"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace magnus

int main() {
  using namespace magnus;
  const std::vector<Criterion> criteria = {
      {"WMA closed form matches per-iteration oracle", wma_oracle},
      {"static batch size", static_size},
      {"short/long grouping and makespan", short_long_mix},
      {"predictor ablation ordering", ablation},
      {"throughput ordering under saturation", throughput_order},
      {"HRRN vs FIFO response time", hrrn_vs_fifo},
      {"OOM split", oom_split},
      {"estimator accuracy", estimator_accuracy},
      {"continuous learning", continuous_learning},
      {"determinism", determinism},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name,
                o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
