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

#include "sim/engine.h"

#include <glog/logging.h>

#include <algorithm>
#include <deque>
#include <queue>
#include <tuple>
#include <unordered_set>

#include "scheduler/scheduler.h"
#include "sim/cost_model.h"

namespace magnus {

std::string_view to_string(Policy policy) {
  switch (policy) {
    case Policy::kVs:
      return "vs";
    case Policy::kCcb:
      return "ccb";
    case Policy::kGlp:
      return "glp";
    case Policy::kAbp:
      return "abp";
    case Policy::kMagnus:
      return "magnus";
  }
  return "?";
}

Policy parse_policy(std::string_view name) {
  if (name == "vs") return Policy::kVs;
  if (name == "ccb") return Policy::kCcb;
  if (name == "glp") return Policy::kGlp;
  if (name == "abp") return Policy::kAbp;
  if (name == "magnus") return Policy::kMagnus;
  throw ConfigError("unknown policy '" + std::string(name) +
                    "' (expected vs, ccb, glp, abp or magnus)");
}

bool uses_predictor(Policy policy) {
  return policy == Policy::kGlp || policy == Policy::kAbp || policy == Policy::kMagnus;
}

void SimConfig::validate() const {
  if (instances < 1) throw ConfigError("instances must be >= 1");
  batcher.validate();
  if (knn_k < 1) throw ConfigError("knn.k must be >= 1");
  if (prediction_latency_s < 0) throw ConfigError("predictor.latency_s must be >= 0");
  if (fixed_batch_size < 0) throw ConfigError("fixed_batch_size must be >= 0");
  if (ccb_capacity < 1) throw ConfigError("ccb_capacity must be >= 1");
  if (!(predictor_retrain_period_s > 0) || !(estimator_retrain_period_s > 0)) {
    throw ConfigError("retrain periods must be > 0");
  }
}

std::vector<TimedBatch> calibration_examples(const LlmProfile& profile) {
  static constexpr int64_t kSizes[] = {1, 2, 4, 8, 16};
  static constexpr TokenCount kLengths[] = {8, 32, 128, 256, 512, 1024};
  std::vector<TimedBatch> out;
  for (int64_t beta : kSizes) {
    for (TokenCount len : kLengths) {
      for (TokenCount gen : kLengths) {
        out.push_back({{static_cast<double>(beta), static_cast<double>(len),
                        static_cast<double>(gen)},
                       serving_time(beta, len, gen, profile.cost)});
      }
    }
  }
  return out;
}

namespace {

enum class EventKind { kArrival, kRetrainPredictor, kRetrainEstimator, kOom, kInstanceIdle };

int priority(EventKind kind) {
  switch (kind) {
    case EventKind::kArrival:
      return 0;
    case EventKind::kRetrainPredictor:
    case EventKind::kRetrainEstimator:
      return 1;
    case EventKind::kOom:
      return 2;
    case EventKind::kInstanceIdle:
      return 3;
  }
  return 4;
}

struct Event {
  double time = 0.0;
  int prio = 0;
  uint64_t seq = 0;
  EventKind kind = EventKind::kArrival;
  int64_t payload = 0;
};

struct Later {
  bool operator()(const Event& a, const Event& b) const {
    return std::tie(a.time, a.prio, a.seq) > std::tie(b.time, b.prio, b.seq);
  }
};

struct InFlight {
  Batch batch;
  double start = 0.0;
  double estimated = -1.0;
  double ratio = -1.0;
  TokenCount oom_at = 0;  // failing iteration, 0 when the batch completes
};

struct ActiveRequest {
  Request req;
  TokenCount generated = 0;
  double start = 0.0;
};

enum class CcbStep { kNone, kJoin, kDecode };

struct Instance {
  bool busy = false;
  bool wake_pending = false;
  double busy_until = 0.0;
  std::optional<InFlight> flight;
  std::vector<ActiveRequest> active;
  std::optional<ActiveRequest> joining;
  CcbStep step = CcbStep::kNone;
};

class EventLoop {
 public:
  EventLoop(const SimConfig& config, const LlmProfile& profile,
            std::shared_ptr<const GenLenPredictor> predictor,
            std::optional<KnnEstimator> estimator, const Trace& trace)
      : config_(config),
        profile_(profile),
        predictor_(std::move(predictor)),
        estimator_(std::move(estimator)),
        trace_(trace),
        instances_(static_cast<size_t>(config.instances)) {
    result_.config = config;
    result_.n_requests = trace.size();
    result_.instance_busy_s.assign(instances_.size(), 0.0);
    if (config_.policy == Policy::kVs || config_.policy == Policy::kGlp) {
      fixed_size_ = config_.fixed_batch_size > 0 ? config_.fixed_batch_size
                                                 : static_batch_size(profile_);
    }
    batcher_ = config_.batcher;
    if (config_.policy == Policy::kGlp) batcher_.max_batch_size = fixed_size_;
    if (config_.policy == Policy::kAbp || config_.policy == Policy::kMagnus) {
      batcher_.max_batch_size = 0;
    }
  }

  SimResult run() {
    const double latency = uses_predictor(config_.policy) ? config_.prediction_latency_s : 0.0;
    for (size_t i = 0; i < trace_.size(); ++i) {
      push(trace_[i].arrival_time + latency, EventKind::kArrival, static_cast<int64_t>(i));
    }
    if (learning()) {
      push(config_.predictor_retrain_period_s, EventKind::kRetrainPredictor, 0);
      push(config_.estimator_retrain_period_s, EventKind::kRetrainEstimator, 0);
    }
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      now_ = ev.time;
      switch (ev.kind) {
        case EventKind::kArrival:
          on_arrival(static_cast<size_t>(ev.payload));
          break;
        case EventKind::kRetrainPredictor:
          on_retrain_predictor();
          break;
        case EventKind::kRetrainEstimator:
          on_retrain_estimator();
          break;
        case EventKind::kOom:
          on_oom(static_cast<size_t>(ev.payload));
          break;
        case EventKind::kInstanceIdle:
          on_instance_idle(static_cast<size_t>(ev.payload));
          break;
      }
    }
    for (const auto& inst : instances_) result_.end_s = std::max(result_.end_s, inst.busy_until);
    return std::move(result_);
  }

 private:
  bool learning() const {
    return config_.policy == Policy::kMagnus && config_.continuous_learning;
  }

  size_t outstanding() const {
    return trace_.size() - result_.requests.size() - result_.rejections.size();
  }

  void push(double time, EventKind kind, int64_t payload) {
    events_.push(Event{time, priority(kind), seq_++, kind, payload});
  }

  void reject(const Request& req, std::string reason) {
    result_.rejections.push_back({req.id, now_, std::move(reason)});
  }

  void wake_idle_instances() {
    for (size_t k = 0; k < instances_.size(); ++k) {
      auto& inst = instances_[k];
      if (!inst.busy && !inst.wake_pending) {
        inst.wake_pending = true;
        push(now_, EventKind::kInstanceIdle, static_cast<int64_t>(k));
      }
    }
  }

  void on_arrival(size_t index) {
    Request req = trace_[index];
    if (!serviceable(req, profile_)) {
      reject(req, "request_exceeds_memory");
      return;
    }
    if (config_.policy == Policy::kCcb) {
      waiting_.push_back(std::move(req));
      wake_idle_instances();
      return;
    }
    if (uses_predictor(config_.policy)) {
      if (!predictor_) throw ContractViolation("policy requires a generation-length predictor");
      req.predicted_gen_len = predictor_->predict(req);
    }
    if (config_.policy == Policy::kVs) {
      enqueue_fcfs(std::move(req));
    } else {
      insert_request(queue_, std::move(req), profile_, batcher_, now_);
    }
    wake_idle_instances();
  }

  void enqueue_fcfs(Request req) {
    if (!queue_.empty()) {
      Batch& last = queue_.at(queue_.size() - 1);
      if (last.insertable && static_cast<int64_t>(last.size()) < fixed_size_) {
        last.requests.push_back(std::move(req));
        return;
      }
    }
    Batch b;
    b.id = queue_.next_batch_id();
    b.created_at = now_;
    b.requests.push_back(std::move(req));
    queue_.push(std::move(b));
  }

  void on_instance_idle(size_t k) {
    auto& inst = instances_[k];
    inst.wake_pending = false;
    if (inst.busy) {
      if (now_ < inst.busy_until) return;
      inst.busy = false;
      if (config_.policy == Policy::kCcb) {
        finish_ccb_step(k);
      } else if (inst.flight) {
        finish_batch(k);
      }
    }
    if (config_.policy == Policy::kCcb) {
      start_ccb_step(k);
    } else {
      dispatch(k);
    }
  }

  void occupy(size_t k, double duration, EventKind kind) {
    auto& inst = instances_[k];
    inst.busy = true;
    inst.busy_until = now_ + duration;
    result_.instance_busy_s[k] += duration;
    push(inst.busy_until, kind, static_cast<int64_t>(k));
  }

  void dispatch(size_t k) {
    if (queue_.empty()) return;
    InFlight flight;
    if (config_.policy == Policy::kMagnus) {
      auto sel = hrrn_select(queue_, estimator_ ? &*estimator_ : nullptr, now_);
      if (sel->decision.fifo_fallback) {
        ++result_.hrrn_fallbacks;
      } else {
        flight.estimated = sel->decision.estimated_serving_time_s;
        flight.ratio = sel->decision.response_ratio;
      }
      flight.batch = std::move(sel->batch);
    } else {
      flight.batch = *fifo_select(queue_);
    }
    flight.batch.insertable = false;
    flight.start = now_;

    const Batch& b = flight.batch;
    const auto beta = static_cast<int64_t>(b.size());
    const TokenCount len = batch_length(b);
    if (auto fail = oom_check(b, profile_)) {
      flight.oom_at = *fail;
      const double charged = serving_time(beta, len, *fail, profile_.cost);
      instances_[k].flight = std::move(flight);
      occupy(k, charged, EventKind::kOom);
      return;
    }
    const double duration = serving_time(b, profile_.cost);
    instances_[k].flight = std::move(flight);
    occupy(k, duration, EventKind::kInstanceIdle);
  }

  void on_oom(size_t k) {
    auto& inst = instances_[k];
    InFlight flight = std::move(*inst.flight);
    inst.flight.reset();
    const Batch& b = flight.batch;
    OomEvent ev;
    ev.time_s = now_;
    ev.batch_id = b.id;
    ev.instance = static_cast<int>(k);
    ev.size = static_cast<int64_t>(b.size());
    ev.fail_iteration = flight.oom_at;
    if (b.size() >= 2) {
      const BatchId first_id = queue_.next_batch_id();
      const BatchId second_id = queue_.next_batch_id();
      auto [first, second] = split_on_oom(b, first_id, second_id);
      ev.first_id = first.id;
      ev.second_id = second.id;
      ev.first_size = static_cast<int64_t>(first.size());
      ev.second_size = static_cast<int64_t>(second.size());
      oom_children_.insert(first.id);
      oom_children_.insert(second.id);
      queue_.push(std::move(first));
      queue_.push(std::move(second));
    } else {
      LOG(WARNING) << "request " << b.requests.front().id
                   << " exceeds KV memory on its own; rejecting";
      reject(b.requests.front(), "oom_single_request");
    }
    result_.ooms.push_back(ev);
    // The instance reloads before it can serve again.
    inst.busy = false;
    occupy(k, profile_.cost.reload_penalty, EventKind::kInstanceIdle);
    wake_idle_instances();
  }

  void finish_batch(size_t k) {
    auto& inst = instances_[k];
    InFlight flight = std::move(*inst.flight);
    inst.flight.reset();
    const Batch& b = flight.batch;
    const TokenCount gen = batch_actual_gen_len(b);

    BatchRecord br;
    br.id = b.id;
    br.instance = static_cast<int>(k);
    br.size = static_cast<int64_t>(b.size());
    br.batch_len = batch_length(b);
    br.predicted_gen_len = 0;
    for (const auto& r : b.requests) {
      br.predicted_gen_len = std::max(br.predicted_gen_len, r.predicted_gen_len.value_or(0));
    }
    br.actual_gen_len = gen;
    br.dispatch_s = flight.start;
    br.finish_s = now_;
    br.estimated_time_s = flight.estimated;
    br.actual_time_s = now_ - flight.start;
    br.response_ratio = flight.ratio;
    br.sealed_by_oom = oom_children_.contains(b.id);
    result_.batches.push_back(br);

    for (const auto& r : b.requests) {
      RequestRecord rec;
      rec.id = r.id;
      rec.task_id = r.task_id;
      rec.instance = static_cast<int>(k);
      rec.batch_id = b.id;
      rec.user_input_len = r.user_input_len;
      rec.request_len = r.request_len;
      rec.predicted_gen_len = r.predicted_gen_len.value_or(0);
      rec.actual_gen_len = r.actual_gen_len;
      rec.arrival_s = r.arrival_time;
      rec.start_s = flight.start;
      rec.finish_s = now_;
      rec.valid_tokens = r.actual_gen_len;
      rec.invalid_tokens = gen - r.actual_gen_len;
      result_.requests.push_back(std::move(rec));
      if (learning()) served_.push_back(r);
    }
  }

  void start_ccb_step(size_t k) {
    auto& inst = instances_[k];
    if (!waiting_.empty() && static_cast<int64_t>(inst.active.size()) < config_.ccb_capacity) {
      ActiveRequest joining{std::move(waiting_.front()), 0, now_};
      waiting_.pop_front();
      const double stall = ccb_join_stall(joining.req.request_len, profile_.cost);
      inst.joining = std::move(joining);
      inst.step = CcbStep::kJoin;
      occupy(k, stall, EventKind::kInstanceIdle);
      return;
    }
    if (!inst.active.empty()) {
      double reads = 0.0;
      for (const auto& a : inst.active) {
        reads += static_cast<double>(a.req.request_len + a.generated + 1);
      }
      inst.step = CcbStep::kDecode;
      occupy(k, ccb_decode_step(reads, profile_.cost), EventKind::kInstanceIdle);
      return;
    }
    inst.step = CcbStep::kNone;
  }

  void finish_ccb_step(size_t k) {
    auto& inst = instances_[k];
    if (inst.step == CcbStep::kJoin) {
      inst.active.push_back(std::move(*inst.joining));
      inst.joining.reset();
    } else if (inst.step == CcbStep::kDecode) {
      for (auto& a : inst.active) ++a.generated;
    }
    inst.step = CcbStep::kNone;
    auto done = std::stable_partition(inst.active.begin(), inst.active.end(),
                                      [](const ActiveRequest& a) {
                                        return a.generated < a.req.actual_gen_len;
                                      });
    for (auto it = done; it != inst.active.end(); ++it) {
      RequestRecord rec;
      rec.id = it->req.id;
      rec.task_id = it->req.task_id;
      rec.instance = static_cast<int>(k);
      rec.user_input_len = it->req.user_input_len;
      rec.request_len = it->req.request_len;
      rec.actual_gen_len = it->req.actual_gen_len;
      rec.arrival_s = it->req.arrival_time;
      rec.start_s = it->start;
      rec.finish_s = now_;
      rec.valid_tokens = it->req.actual_gen_len;
      rec.invalid_tokens = 0;
      result_.requests.push_back(std::move(rec));
    }
    inst.active.erase(done, inst.active.end());
  }

  void on_retrain_predictor() {
    std::vector<Request> window(served_.begin() + static_cast<std::ptrdiff_t>(predictor_cursor_),
                                served_.end());
    predictor_cursor_ = served_.size();
    if (predictor_) {
      std::vector<RequestId> collected;
      auto next = std::make_shared<const GenLenPredictor>(
          predictor_->continuous_learn(window, &collected));
      RetrainEvent ev{now_, "predictor", window.size(), {}, next->training_size()};
      ev.collected.assign(collected.begin(), collected.end());
      result_.retrains.push_back(std::move(ev));
      // Publish the replacement model; in-flight predictions already hold
      // their values.
      predictor_ = std::move(next);
    }
    if (outstanding() > 0) {
      push(now_ + config_.predictor_retrain_period_s, EventKind::kRetrainPredictor, 0);
    }
  }

  void on_retrain_estimator() {
    std::vector<BatchLog> logs;
    std::vector<BatchId> ids;
    for (size_t i = estimator_cursor_; i < result_.batches.size(); ++i) {
      const auto& b = result_.batches[i];
      logs.push_back({b.size, b.batch_len, b.predicted_gen_len, b.actual_gen_len,
                      b.actual_time_s});
      ids.push_back(b.id);
    }
    estimator_cursor_ = result_.batches.size();
    if (estimator_) {
      std::vector<size_t> collected;
      KnnEstimator next = estimator_->continuous_learn(logs, &collected);
      RetrainEvent ev{now_, "estimator", logs.size(), {}, next.size()};
      for (size_t i : collected) ev.collected.push_back(ids[i]);
      result_.retrains.push_back(std::move(ev));
      estimator_ = std::move(next);
    }
    if (outstanding() > 0) {
      push(now_ + config_.estimator_retrain_period_s, EventKind::kRetrainEstimator, 0);
    }
  }

  const SimConfig& config_;
  const LlmProfile& profile_;
  std::shared_ptr<const GenLenPredictor> predictor_;
  std::optional<KnnEstimator> estimator_;
  const Trace& trace_;

  BatcherConfig batcher_;
  int64_t fixed_size_ = 0;
  std::vector<Instance> instances_;
  BatchQueue queue_;
  std::deque<Request> waiting_;  // ccb only
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  uint64_t seq_ = 0;
  double now_ = 0.0;

  std::unordered_set<BatchId> oom_children_;
  std::vector<Request> served_;
  size_t predictor_cursor_ = 0;
  size_t estimator_cursor_ = 0;
  SimResult result_;
};

}  // namespace

Simulator::Simulator(SimConfig config, LlmProfile profile,
                     std::shared_ptr<const GenLenPredictor> predictor,
                     std::optional<KnnEstimator> estimator)
    : config_(std::move(config)),
      profile_(std::move(profile)),
      predictor_(std::move(predictor)),
      estimator_(std::move(estimator)) {
  config_.validate();
  profile_.validate();
  if (uses_predictor(config_.policy) && !predictor_) {
    if (config_.predictor_mode != PredictorMode::kUilo) {
      throw ConfigError("policy " + std::string(to_string(config_.policy)) +
                        " needs a trained generation-length predictor");
    }
    PredictorOptions opts;
    opts.g_max = profile_.g_max;
    predictor_ = std::make_shared<const GenLenPredictor>(
        GenLenPredictor::train({}, PredictorMode::kUilo, opts));
  }
  if (predictor_) config_.predictor_mode = predictor_->mode();
  if (config_.policy == Policy::kMagnus && !estimator_) {
    estimator_ = KnnEstimator(calibration_examples(profile_), config_.knn_k);
  }
}

SimResult Simulator::run(const Trace& trace) {
  EventLoop loop(config_, profile_, predictor_, estimator_, trace);
  return loop.run();
}

nlohmann::json sim_config_to_json(const SimConfig& c) {
  return {{"policy", std::string(to_string(c.policy))},
          {"instances", c.instances},
          {"batcher",
           {{"phi", c.batcher.phi},
            {"wait_bounds", std::string(to_string(c.batcher.wait_bounds))}}},
          {"knn", {{"k", c.knn_k}}},
          {"predictor",
           {{"mode", std::string(to_string(c.predictor_mode))},
            {"latency_s", c.prediction_latency_s}}},
          {"fixed_batch_size", c.fixed_batch_size},
          {"ccb_capacity", c.ccb_capacity},
          {"retrain_period_s",
           {{"predictor", c.predictor_retrain_period_s},
            {"estimator", c.estimator_retrain_period_s}}},
          {"continuous_learning", c.continuous_learning},
          {"seed", c.seed}};
}

void apply_sim_config(const nlohmann::json& j, SimConfig& c, LlmProfile& profile) {
  if (!j.is_object()) throw ConfigError("simulation config must be a JSON object");
  try {
    if (j.contains("policy")) c.policy = parse_policy(j.at("policy").get<std::string>());
    c.instances = j.value("instances", c.instances);
    if (j.contains("profile")) profile = j.at("profile").get<LlmProfile>();
    if (j.contains("batcher")) {
      const auto& b = j.at("batcher");
      c.batcher.phi = b.value("phi", c.batcher.phi);
      if (b.contains("wait_bounds")) {
        c.batcher.wait_bounds = parse_wait_bounds(b.at("wait_bounds").get<std::string>());
      }
    }
    if (j.contains("knn")) c.knn_k = j.at("knn").value("k", c.knn_k);
    if (j.contains("predictor")) {
      const auto& p = j.at("predictor");
      if (p.contains("mode")) {
        c.predictor_mode = parse_predictor_mode(p.at("mode").get<std::string>());
      }
      c.prediction_latency_s = p.value("latency_s", c.prediction_latency_s);
    }
    if (j.contains("cost")) {
      const auto& cost = j.at("cost");
      profile.cost.a0 = cost.value("a0", profile.cost.a0);
      profile.cost.a1 = cost.value("a1", profile.cost.a1);
      profile.cost.b0 = cost.value("b0", profile.cost.b0);
      profile.cost.b1 = cost.value("b1", profile.cost.b1);
      profile.cost.reload_penalty = cost.value("reload_penalty", profile.cost.reload_penalty);
    }
    c.fixed_batch_size = j.value("fixed_batch_size", c.fixed_batch_size);
    c.ccb_capacity = j.value("ccb_capacity", c.ccb_capacity);
    c.continuous_learning = j.value("continuous_learning", c.continuous_learning);
    if (j.contains("retrain_period_s")) {
      const auto& r = j.at("retrain_period_s");
      c.predictor_retrain_period_s = r.value("predictor", c.predictor_retrain_period_s);
      c.estimator_retrain_period_s = r.value("estimator", c.estimator_retrain_period_s);
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid simulation config: ") + e.what());
  }
  c.validate();
  profile.validate();
}

}  // namespace magnus
