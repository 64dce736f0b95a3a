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

// Command-line front end over the magnus C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "magnus/magnus.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Per-task size of the corpus used when simulate must train its own model.
constexpr int64_t kAutoTrainPerTask = 250;
constexpr int kAutoTrainTrees = 40;

struct Failure {
  int code;
  std::string message;
};

void check(magnus_status status) {
  if (status == MAGNUS_OK) return;
  const int code = status == MAGNUS_RUNTIME_ERROR ? kExitRuntime : kExitConfig;
  throw Failure{code, magnus_last_error()};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitConfig, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_object(const std::string& path) {
  try {
    auto j = nlohmann::json::parse(read_file(path));
    if (!j.is_object()) throw Failure{kExitConfig, path + ": expected a JSON object"};
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw Failure{kExitConfig, path + ": " + e.what()};
  }
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using TracePtr = std::unique_ptr<magnus_trace_t, Deleter<magnus_trace_t, magnus_trace_free>>;
using ProfilePtr =
    std::unique_ptr<magnus_profile_t, Deleter<magnus_profile_t, magnus_profile_free>>;
using PredictorPtr =
    std::unique_ptr<magnus_predictor_t, Deleter<magnus_predictor_t, magnus_predictor_free>>;
using ReportPtr = std::unique_ptr<magnus_report_t, Deleter<magnus_report_t, magnus_report_free>>;
using StringPtr = std::unique_ptr<char, Deleter<char, magnus_string_free>>;

TracePtr load_trace(const std::string& path) {
  magnus_trace_t* t = nullptr;
  check(magnus_trace_load(path.c_str(), &t));
  return TracePtr(t);
}

struct GenWorkloadArgs {
  std::string config;
  std::string out;
  uint64_t seed = 0;
  double rate = 0.0;
  int64_t n = 0;
};

void gen_workload(const GenWorkloadArgs& a) {
  nlohmann::json cfg = a.config.empty() ? nlohmann::json::object() : read_json_object(a.config);
  if (a.rate > 0) cfg["rate"] = a.rate;
  if (a.n > 0) cfg["n_requests"] = a.n;
  magnus_trace_t* t = nullptr;
  check(magnus_trace_generate(cfg.dump().c_str(), a.seed, &t));
  TracePtr trace(t);
  check(magnus_trace_save(trace.get(), a.out.c_str()));
  std::cerr << "wrote " << magnus_trace_size(trace.get()) << " requests to " << a.out << "\n";
}

struct SimulateArgs {
  std::string trace;
  std::string policy;
  int instances = 0;
  std::string profile;
  std::string out;
  std::string log_dir;
  uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string model;
  double rate = 0.0;
};

bool needs_predictor(const std::string& policy) {
  return policy == "glp" || policy == "abp" || policy == "magnus";
}

void simulate(const SimulateArgs& a) {
  nlohmann::json cfg = a.config.empty() ? nlohmann::json::object() : read_json_object(a.config);
  if (!a.policy.empty()) cfg["policy"] = a.policy;
  if (a.instances > 0) cfg["instances"] = a.instances;
  if (a.seed_set) cfg["seed"] = a.seed;
  if (a.rate > 0) cfg["rate"] = a.rate;
  const std::string policy = cfg.value("policy", std::string("magnus"));
  const uint64_t seed = cfg.value("seed", uint64_t{0});

  TracePtr trace = load_trace(a.trace);
  ProfilePtr profile;
  {
    magnus_profile_t* p = nullptr;
    check(a.profile.empty() ? magnus_profile_default(&p)
                            : magnus_profile_load(a.profile.c_str(), &p));
    profile.reset(p);
  }

  PredictorPtr predictor;
  if (needs_predictor(policy)) {
    magnus_predictor_t* p = nullptr;
    if (!a.model.empty()) {
      check(magnus_predictor_load(a.model.c_str(), nullptr, &p));
    } else {
      std::string mode = "USIN";
      if (cfg.contains("predictor")) mode = cfg["predictor"].value("mode", mode);
      magnus_trace_t* corpus = nullptr;
      check(magnus_trace_corpus(nullptr, kAutoTrainPerTask, seed + 1, &corpus));
      TracePtr corpus_ptr(corpus);
      const nlohmann::json opts = {{"mode", mode}, {"seed", seed}, {"trees", kAutoTrainTrees}};
      std::cerr << "no --model given; training a " << mode << " predictor on "
                << magnus_trace_size(corpus) << " synthetic requests\n";
      check(magnus_predictor_train(corpus, opts.dump().c_str(), &p));
    }
    predictor.reset(p);
  }

  magnus_report_t* r = nullptr;
  check(magnus_simulate(trace.get(), profile.get(), predictor.get(), cfg.dump().c_str(), &r));
  ReportPtr report(r);
  check(magnus_report_write(report.get(), a.out.c_str(),
                            a.log_dir.empty() ? nullptr : a.log_dir.c_str()));
  char* metrics = nullptr;
  check(magnus_report_metrics_json(report.get(), &metrics));
  StringPtr metrics_ptr(metrics);
  const auto m = nlohmann::json::parse(metrics);
  std::cerr << policy << ": " << m["n_completed"] << "/" << m["n_requests"]
            << " requests, " << m["request_throughput"] << " req/s, avg RT "
            << m["avg_response_time_s"] << " s\n";
}

struct TrainArgs {
  std::string trace;
  std::string mode = "USIN";
  std::string out;
  uint64_t seed = 0;
  int trees = 0;
};

void train_predictor(const TrainArgs& a) {
  TracePtr trace = load_trace(a.trace);
  nlohmann::json opts = {{"mode", a.mode}, {"seed", a.seed}};
  if (a.trees > 0) opts["trees"] = a.trees;
  magnus_predictor_t* p = nullptr;
  check(magnus_predictor_train(trace.get(), opts.dump().c_str(), &p));
  PredictorPtr predictor(p);
  check(magnus_predictor_save(predictor.get(), a.out.c_str()));
  std::cerr << "trained " << magnus_predictor_mode(predictor.get()) << " predictor on "
            << magnus_trace_size(trace.get()) << " requests\n";
}

void eval_predictor(const std::string& model, const std::string& trace_path) {
  magnus_predictor_t* p = nullptr;
  check(magnus_predictor_load(model.c_str(), nullptr, &p));
  PredictorPtr predictor(p);
  TracePtr trace = load_trace(trace_path);
  double rmse = 0.0;
  check(magnus_predictor_rmse(predictor.get(), trace.get(), &rmse));
  std::printf("%s rmse=%.6f n=%zu\n", magnus_predictor_mode(predictor.get()), rmse,
              magnus_trace_size(trace.get()));
}

void report(const std::vector<std::string>& metrics, const std::string& out) {
  std::vector<const char*> paths;
  for (const auto& m : metrics) paths.push_back(m.c_str());
  char* csv = nullptr;
  check(magnus_metrics_csv(paths.data(), paths.size(), &csv));
  StringPtr csv_ptr(csv);
  if (out.empty()) {
    std::fputs(csv, stdout);
    return;
  }
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw Failure{kExitRuntime, "cannot write " + out};
  f << csv;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch-serving scheduler simulator"};
  app.require_subcommand(1);

  GenWorkloadArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-workload", "Generate a synthetic request trace");
  gen_cmd->add_option("--config", gen.config, "Workload config JSON");
  gen_cmd->add_option("--out", gen.out, "Trace JSONL output")->required();
  gen_cmd->add_option("--seed", gen.seed, "Random seed");
  gen_cmd->add_option("--rate", gen.rate, "Override arrival rate (req/s)");
  gen_cmd->add_option("--n", gen.n, "Override number of requests");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Simulate serving a trace");
  sim_cmd->add_option("--trace", sim.trace, "Trace JSONL")->required();
  sim_cmd->add_option("--policy", sim.policy, "vs, ccb, glp, abp or magnus");
  sim_cmd->add_option("--instances", sim.instances, "Number of LLM instances");
  sim_cmd->add_option("--profile", sim.profile, "LLM profile JSON");
  sim_cmd->add_option("--out", sim.out, "Metrics JSON output")->required();
  sim_cmd->add_option("--log-dir", sim.log_dir, "Directory for the run log");
  auto* seed_opt = sim_cmd->add_option("--seed", sim.seed, "Random seed");
  sim_cmd->add_option("--config", sim.config, "Simulation config JSON");
  sim_cmd->add_option("--model", sim.model, "Trained predictor model");
  sim_cmd->add_option("--rate", sim.rate, "Offered rate recorded in the metrics");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-predictor", "Train a generation-length predictor");
  train_cmd->add_option("--trace", train.trace, "Training trace JSONL")->required();
  train_cmd->add_option("--mode", train.mode, "UILO, RAFT, INST or USIN");
  train_cmd->add_option("--out", train.out, "Model JSON output")->required();
  train_cmd->add_option("--seed", train.seed, "Random seed");
  train_cmd->add_option("--trees", train.trees, "Number of trees");

  std::string eval_model;
  std::string eval_trace;
  auto* eval_cmd = app.add_subcommand("eval-predictor", "RMSE of a model on a trace");
  eval_cmd->add_option("--model", eval_model, "Model JSON")->required();
  eval_cmd->add_option("--trace", eval_trace, "Test trace JSONL")->required();

  std::vector<std::string> report_metrics;
  std::string report_out;
  auto* report_cmd = app.add_subcommand("report", "Tabulate metrics files as CSV");
  report_cmd->add_option("--metrics", report_metrics, "Metrics JSON files")->required();
  report_cmd->add_option("--out", report_out, "CSV output (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*gen_cmd) {
      gen_workload(gen);
    } else if (*sim_cmd) {
      sim.seed_set = seed_opt->count() > 0;
      simulate(sim);
    } else if (*train_cmd) {
      train_predictor(train);
    } else if (*eval_cmd) {
      eval_predictor(eval_model, eval_trace);
    } else if (*report_cmd) {
      report(report_metrics, report_out);
    }
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
