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

#include "harness/log_store.h"

#include <fstream>
#include <sstream>

namespace magnus {

namespace {

using ojson = nlohmann::ordered_json;

ojson to_line(const RequestRecord& r) {
  return {{"type", "request"},       {"id", r.id},
          {"task_id", r.task_id},    {"instance", r.instance},
          {"batch_id", r.batch_id},  {"uil", r.user_input_len},
          {"req_len", r.request_len}, {"pred_gen_len", r.predicted_gen_len},
          {"gen_len", r.actual_gen_len}, {"arrival_s", r.arrival_s},
          {"start_s", r.start_s},    {"finish_s", r.finish_s},
          {"valid_tokens", r.valid_tokens}, {"invalid_tokens", r.invalid_tokens}};
}

ojson to_line(const BatchRecord& b) {
  return {{"type", "batch"},
          {"id", b.id},
          {"instance", b.instance},
          {"size", b.size},
          {"batch_len", b.batch_len},
          {"pred_gen_len", b.predicted_gen_len},
          {"gen_len", b.actual_gen_len},
          {"dispatch_s", b.dispatch_s},
          {"finish_s", b.finish_s},
          {"estimated_time_s", b.estimated_time_s},
          {"actual_time_s", b.actual_time_s},
          {"response_ratio", b.response_ratio},
          {"sealed_by_oom", b.sealed_by_oom}};
}

ojson to_line(const OomEvent& e) {
  return {{"type", "oom"},          {"time_s", e.time_s},
          {"batch_id", e.batch_id}, {"instance", e.instance},
          {"size", e.size},         {"fail_iteration", e.fail_iteration},
          {"first_id", e.first_id}, {"second_id", e.second_id},
          {"first_size", e.first_size}, {"second_size", e.second_size}};
}

ojson to_line(const RetrainEvent& e) {
  return {{"type", "retrain"},          {"time_s", e.time_s},
          {"kind", e.kind},             {"window_size", e.window_size},
          {"collected", e.collected},   {"training_size", e.training_size}};
}

ojson to_line(const Rejection& r) {
  return {{"type", "rejection"}, {"id", r.id}, {"time_s", r.time_s}, {"reason", r.reason}};
}

RequestRecord request_from(const nlohmann::json& j) {
  RequestRecord r;
  r.id = j.at("id");
  r.task_id = j.at("task_id");
  r.instance = j.at("instance");
  r.batch_id = j.at("batch_id");
  r.user_input_len = j.at("uil");
  r.request_len = j.at("req_len");
  r.predicted_gen_len = j.at("pred_gen_len");
  r.actual_gen_len = j.at("gen_len");
  r.arrival_s = j.at("arrival_s");
  r.start_s = j.at("start_s");
  r.finish_s = j.at("finish_s");
  r.valid_tokens = j.at("valid_tokens");
  r.invalid_tokens = j.at("invalid_tokens");
  return r;
}

BatchRecord batch_from(const nlohmann::json& j) {
  BatchRecord b;
  b.id = j.at("id");
  b.instance = j.at("instance");
  b.size = j.at("size");
  b.batch_len = j.at("batch_len");
  b.predicted_gen_len = j.at("pred_gen_len");
  b.actual_gen_len = j.at("gen_len");
  b.dispatch_s = j.at("dispatch_s");
  b.finish_s = j.at("finish_s");
  b.estimated_time_s = j.at("estimated_time_s");
  b.actual_time_s = j.at("actual_time_s");
  b.response_ratio = j.at("response_ratio");
  b.sealed_by_oom = j.at("sealed_by_oom");
  return b;
}

OomEvent oom_from(const nlohmann::json& j) {
  OomEvent e;
  e.time_s = j.at("time_s");
  e.batch_id = j.at("batch_id");
  e.instance = j.at("instance");
  e.size = j.at("size");
  e.fail_iteration = j.at("fail_iteration");
  e.first_id = j.at("first_id");
  e.second_id = j.at("second_id");
  e.first_size = j.at("first_size");
  e.second_size = j.at("second_size");
  return e;
}

RetrainEvent retrain_from(const nlohmann::json& j) {
  RetrainEvent e;
  e.time_s = j.at("time_s");
  e.kind = j.at("kind");
  e.window_size = j.at("window_size");
  e.collected = j.at("collected").get<std::vector<int64_t>>();
  e.training_size = j.at("training_size");
  return e;
}

// Whether work remained when a retrain timer fired at `t` (arrivals at `t`
// are processed before the timer, completions and OOMs after it).
bool outstanding_at(const RunLog& log, double t) {
  for (const auto& r : log.requests) {
    if (r.finish_s >= t) return true;
  }
  for (const auto& r : log.rejections) {
    if (r.time_s > t || (r.time_s == t && r.reason == "oom_single_request")) return true;
  }
  return false;
}

}  // namespace

std::string run_log_to_jsonl(const SimResult& result, const LlmProfile& profile) {
  std::ostringstream out;
  ojson header = {{"type", "run"}, {"config", sim_config_to_json(result.config)}};
  header["profile"] = nlohmann::json(profile);
  out << header.dump() << '\n';
  for (const auto& b : result.batches) out << to_line(b).dump() << '\n';
  for (const auto& r : result.requests) out << to_line(r).dump() << '\n';
  for (const auto& e : result.ooms) out << to_line(e).dump() << '\n';
  for (const auto& e : result.retrains) out << to_line(e).dump() << '\n';
  for (const auto& r : result.rejections) out << to_line(r).dump() << '\n';
  return out.str();
}

void write_run_log(const std::filesystem::path& dir, const SimResult& result,
                   const LlmProfile& profile) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create log directory " + dir.string());
  std::ofstream out(dir / kRunLogName, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + (dir / kRunLogName).string());
  out << run_log_to_jsonl(result, profile);
}

RunLog read_run_log(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("cannot open log " + file.string());
  RunLog log;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const std::string type = j.at("type");
      if (type == "run") {
        log.profile = j.at("profile").get<LlmProfile>();
        apply_sim_config(j.at("config"), log.config, log.profile);
      } else if (type == "request") {
        log.requests.push_back(request_from(j));
      } else if (type == "batch") {
        log.batches.push_back(batch_from(j));
      } else if (type == "oom") {
        log.ooms.push_back(oom_from(j));
      } else if (type == "retrain") {
        log.retrains.push_back(retrain_from(j));
      } else if (type == "rejection") {
        log.rejections.push_back({j.at("id"), j.at("time_s"), j.at("reason")});
      } else {
        throw ConfigError("unknown record type '" + type + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

std::vector<RetrainEvent> replay_retraining(const RunLog& log) {
  std::vector<RetrainEvent> events;
  const SimConfig& c = log.config;
  if (c.policy != Policy::kMagnus || !c.continuous_learning) return events;

  struct Timer {
    std::string kind;
    double period;
    double next;
    size_t cursor = 0;
  };
  Timer pred{"predictor", c.predictor_retrain_period_s, c.predictor_retrain_period_s};
  Timer est{"estimator", c.estimator_retrain_period_s, c.estimator_retrain_period_s};
  bool pred_live = true;
  bool est_live = true;
  KnnEstimator estimator(calibration_examples(log.profile), c.knn_k);

  // Records are in completion order; a record finishing exactly at a timer
  // tick belongs to the following window.
  auto window_end = [](const auto& records, size_t from, double t) {
    size_t i = from;
    while (i < records.size() && records[i].finish_s < t) ++i;
    return i;
  };

  while (pred_live || est_live) {
    // On equal ticks the predictor timer was armed first.
    const bool fire_pred = pred_live && (!est_live || pred.next <= est.next);
    Timer& timer = fire_pred ? pred : est;
    const double t = timer.next;
    RetrainEvent ev;
    ev.time_s = t;
    ev.kind = timer.kind;
    if (fire_pred) {
      const size_t end = window_end(log.requests, timer.cursor, t);
      ev.window_size = end - timer.cursor;
      if (c.predictor_mode != PredictorMode::kUilo) {
        for (size_t i = timer.cursor; i < end; ++i) {
          const auto& r = log.requests[i];
          if (r.predicted_gen_len > 0 &&
              needs_relearning(r.predicted_gen_len, r.actual_gen_len)) {
            ev.collected.push_back(r.id);
          }
        }
      }
      timer.cursor = end;
    } else {
      const size_t end = window_end(log.batches, timer.cursor, t);
      std::vector<BatchLog> logs;
      for (size_t i = timer.cursor; i < end; ++i) {
        const auto& b = log.batches[i];
        logs.push_back({b.size, b.batch_len, b.predicted_gen_len, b.actual_gen_len,
                        b.actual_time_s});
      }
      std::vector<size_t> collected;
      estimator = estimator.continuous_learn(logs, &collected);
      for (size_t i : collected) ev.collected.push_back(log.batches[timer.cursor + i].id);
      ev.window_size = end - timer.cursor;
      ev.training_size = estimator.size();
      timer.cursor = end;
    }
    events.push_back(std::move(ev));
    if (outstanding_at(log, t)) {
      timer.next = t + timer.period;
    } else {
      (fire_pred ? pred_live : est_live) = false;
    }
  }
  return events;
}

}  // namespace magnus
