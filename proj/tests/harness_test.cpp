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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "harness/log_store.h"
#include "harness/metrics.h"
#include "harness/report.h"
#include "workload/workload.h"

namespace magnus {
namespace {

RequestRecord record(RequestId id, double arrival, double finish, TokenCount valid,
                     TokenCount invalid = 0) {
  RequestRecord r;
  r.id = id;
  r.arrival_s = arrival;
  r.start_s = arrival;
  r.finish_s = finish;
  r.valid_tokens = valid;
  r.invalid_tokens = invalid;
  r.actual_gen_len = valid;
  return r;
}

TEST(Metrics, SingleRequest) {
  const std::vector<RequestRecord> r = {record(0, 0.0, 2.0, 10)};
  const auto m = compute_metrics(r, 2.0);
  EXPECT_DOUBLE_EQ(m.request_throughput, 0.5);
  EXPECT_DOUBLE_EQ(m.token_throughput, 5.0);
  EXPECT_DOUBLE_EQ(m.valid_token_throughput, 5.0);
  EXPECT_DOUBLE_EQ(m.avg_response_time_s, 2.0);
  EXPECT_DOUBLE_EQ(m.p95_response_time_s, 2.0);
}

TEST(Metrics, InvalidTokensCountTowardTokenThroughputOnly) {
  // A batch generating {5, 10}: the short request pads 5 extra tokens.
  const std::vector<RequestRecord> r = {record(0, 0.0, 4.0, 5, 5), record(1, 0.0, 4.0, 10)};
  const auto m = compute_metrics(r, 4.0);
  EXPECT_EQ(m.invalid_tokens, 5);
  EXPECT_DOUBLE_EQ(m.token_throughput, 20.0 / 4.0);
  EXPECT_DOUBLE_EQ(m.valid_token_throughput, 15.0 / 4.0);
}

TEST(Metrics, NearestRankPercentile) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  EXPECT_EQ(nearest_rank(v, 0.95), 95);
  EXPECT_EQ(nearest_rank(v, 1.0), 100);
  EXPECT_EQ(nearest_rank({3.0, 1.0, 2.0}, 0.95), 3.0);
  EXPECT_EQ(nearest_rank({7.0}, 0.01), 7.0);
  EXPECT_THROW(nearest_rank({}, 0.5), ContractViolation);
  EXPECT_THROW(nearest_rank({1.0}, 0.0), ContractViolation);
}

TEST(Metrics, InvariantToRecordOrder) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  std::vector<RequestRecord> r;
  for (int i = 0; i < 200; ++i) {
    const double a = u(rng);
    r.push_back(record(i, a, a + u(rng) * 0.1 + 0.001, 1 + i % 37, i % 5));
  }
  const auto a = metrics_to_json(compute_metrics(r, 60.0));
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(r.begin(), r.end(), rng);
    EXPECT_EQ(metrics_to_json(compute_metrics(r, 60.0)), a);
  }
}

TEST(Metrics, RejectsEmptyInputAndBadHorizon) {
  EXPECT_THROW(compute_metrics({}, 1.0), ContractViolation);
  const std::vector<RequestRecord> r = {record(0, 0.0, 1.0, 1)};
  EXPECT_THROW(compute_metrics(r, 0.0), ContractViolation);
}

TEST(Metrics, RmseSeriesBucketsByWindow) {
  std::vector<RequestRecord> r;
  auto add = [&](double finish, TokenCount pred, TokenCount actual) {
    auto x = record(0, 0.0, finish, actual);
    x.predicted_gen_len = pred;
    r.push_back(x);
  };
  add(10, 13, 10);
  add(50, 6, 10);
  add(130, 10, 10);
  add(140, 0, 99);  // not predicted
  const auto s = predictor_rmse_series(r, 120.0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_DOUBLE_EQ(s[0].window_end_s, 120.0);
  EXPECT_EQ(s[0].samples, 2u);
  EXPECT_DOUBLE_EQ(s[0].rmse, std::sqrt((9.0 + 16.0) / 2.0));
  EXPECT_EQ(s[1].samples, 1u);
  EXPECT_DOUBLE_EQ(s[1].rmse, 0.0);
}

TEST(Metrics, JsonRoundTrip) {
  const std::vector<RequestRecord> r = {record(0, 0.0, 2.0, 10), record(1, 1.0, 5.0, 3, 7)};
  auto m = compute_metrics(r, 5.0);
  m.policy = "abp";
  m.instances = 3;
  m.rate = 12;
  m.utilization = {0.5, 0.25};
  m.predictor_rmse = {{120.0, 4, 1.5}};
  const auto j = metrics_to_json(m);
  EXPECT_EQ(metrics_to_json(metrics_from_json(nlohmann::json::parse(j.dump()))), j);
  EXPECT_THROW(metrics_from_json(nlohmann::json{{"policy", "vs"}}), ConfigError);
}

TEST(Report, CsvRowsFollowArgumentOrder) {
  const std::vector<RequestRecord> r = {record(0, 0.0, 2.0, 10)};
  auto a = compute_metrics(r, 2.0);
  a.policy = "vs";
  a.n_requests = 1;
  auto b = a;
  b.policy = "magnus";
  b.rate = 16;
  const std::vector<MetricsReport> reports = {a, b};
  const std::string csv = report_csv(reports);
  const std::string header =
      "policy,rate,instances,seed,n_requests,n_completed,n_rejected,request_throughput,"
      "token_throughput,valid_token_throughput,avg_response_time_s,p95_response_time_s,"
      "oom_events,retrain_events\n";
  ASSERT_EQ(csv.substr(0, header.size()), header);
  const std::string rows = csv.substr(header.size());
  EXPECT_EQ(rows.substr(0, 3), "vs,");
  EXPECT_NE(rows.find("\nmagnus,16.000000,"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);

  const std::vector<MetricsReport> only_a = {a};
  const std::vector<MetricsReport> only_b = {b};
  EXPECT_EQ(report_csv(only_a) + report_csv(only_b).substr(header.size()), csv);
}

class LogReplay : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const auto tasks = default_tasks();
    const auto corpus = gen_task_corpus(tasks, 60, 1024, 1024, 11);
    PredictorOptions opts;
    opts.forest.n_trees = 10;
    opts.seed = 1;
    auto model = std::make_shared<GenLenPredictor>(
        GenLenPredictor::train(corpus, PredictorMode::kInst, opts));

    WorkloadConfig w;
    w.rate = 10;
    w.n_requests = 1200;
    w.tasks = tasks;
    SimConfig c;
    c.policy = Policy::kMagnus;
    c.instances = 5;
    profile_ = new LlmProfile();
    result_ = new SimResult(Simulator(c, *profile_, model).run(gen_trace(w, 12)));
  }
  static void TearDownTestSuite() {
    delete result_;
    delete profile_;
  }
  static SimResult* result_;
  static LlmProfile* profile_;
};
SimResult* LogReplay::result_ = nullptr;
LlmProfile* LogReplay::profile_ = nullptr;

TEST_F(LogReplay, WriteReadRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "magnus_harness_log";
  std::filesystem::remove_all(dir);
  write_run_log(dir, *result_, *profile_);
  const auto log = read_run_log(dir / kRunLogName);
  EXPECT_EQ(log.config.policy, Policy::kMagnus);
  EXPECT_EQ(log.config.predictor_mode, PredictorMode::kInst);
  EXPECT_EQ(log.requests.size(), result_->requests.size());
  EXPECT_EQ(log.batches.size(), result_->batches.size());
  EXPECT_EQ(log.ooms.size(), result_->ooms.size());
  EXPECT_EQ(log.retrains.size(), result_->retrains.size());
  EXPECT_EQ(log.rejections.size(), result_->rejections.size());
  for (size_t i = 0; i < log.requests.size(); ++i) {
    EXPECT_EQ(log.requests[i].finish_s, result_->requests[i].finish_s);
    EXPECT_EQ(log.requests[i].predicted_gen_len, result_->requests[i].predicted_gen_len);
  }
  std::filesystem::remove_all(dir);
}

TEST_F(LogReplay, ReplayReproducesCollectionDecisions) {
  const auto dir = std::filesystem::temp_directory_path() / "magnus_harness_replay";
  std::filesystem::remove_all(dir);
  write_run_log(dir, *result_, *profile_);
  const auto log = read_run_log(dir / kRunLogName);
  const auto replay = replay_retraining(log);
  ASSERT_EQ(replay.size(), result_->retrains.size());
  size_t collected = 0;
  for (size_t i = 0; i < replay.size(); ++i) {
    const auto& live = result_->retrains[i];
    EXPECT_EQ(replay[i].time_s, live.time_s) << i;
    EXPECT_EQ(replay[i].kind, live.kind) << i;
    EXPECT_EQ(replay[i].window_size, live.window_size) << i;
    EXPECT_EQ(replay[i].collected, live.collected) << i;
    collected += live.collected.size();
  }
  EXPECT_GT(collected, 0u);
  std::filesystem::remove_all(dir);
}

TEST(LogStore, MalformedLineIsConfigError) {
  const auto path = std::filesystem::temp_directory_path() / "magnus_bad_log.jsonl";
  {
    std::ofstream out(path);
    out << "{\"type\":\"request\",\"id\":1}\n";
  }
  EXPECT_THROW(read_run_log(path), ConfigError);
  {
    std::ofstream out(path);
    out << "{\"type\":\"mystery\"}\n";
  }
  EXPECT_THROW(read_run_log(path), ConfigError);
  std::filesystem::remove(path);
  EXPECT_THROW(read_run_log(path), ConfigError);
}

TEST(LogStore, ReplayIsEmptyWithoutContinuousLearning) {
  RunLog log;
  log.config.policy = Policy::kAbp;
  EXPECT_TRUE(replay_retraining(log).empty());
}

}  // namespace
}  // namespace magnus
