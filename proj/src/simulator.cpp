// Copyright 2026 The AF-Pipe Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "afpipe/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <stdexcept>
#include <tuple>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace {

constexpr std::int64_t kLanes = 3;

std::int64_t to_ns(const Task& task) {
  if (std::isnan(task.duration) || task.duration < 0.0) {
    throw NegativeDuration(
        fmt::format("task {} has duration {}", task.id, task.duration));
  }
  const double ns = task.duration * 1e9;
  if (!(ns < 9.0e18)) {
    throw SimulationError(
        fmt::format("task {} duration {} s is out of range", task.id, task.duration));
  }
  return std::llround(ns);
}

using Interval = std::pair<std::int64_t, std::int64_t>;

std::vector<Interval> merge(std::vector<Interval> v) {
  std::sort(v.begin(), v.end());
  std::vector<Interval> out;
  for (const auto& iv : v) {
    if (iv.first >= iv.second) continue;
    if (!out.empty() && iv.first <= out.back().second) {
      out.back().second = std::max(out.back().second, iv.second);
    } else {
      out.push_back(iv);
    }
  }
  return out;
}

// Total length of `a` not covered by `b`; both merged and sorted.
std::int64_t uncovered(const std::vector<Interval>& a,
                       const std::vector<Interval>& b) {
  std::int64_t total = 0;
  std::size_t j = 0;
  for (const auto& [lo, hi] : a) {
    std::int64_t cursor = lo;
    while (j < b.size() && b[j].second <= cursor) ++j;
    for (std::size_t k = j; k < b.size() && b[k].first < hi; ++k) {
      if (b[k].first > cursor) total += b[k].first - cursor;
      cursor = std::max(cursor, b[k].second);
      if (cursor >= hi) break;
    }
    if (cursor < hi) total += hi - cursor;
  }
  return total;
}

std::int64_t exposed_comm_ns(const ScheduleTrace& trace) {
  std::vector<Interval> comm;
  std::vector<Interval> compute;
  for (const auto& e : trace.events) {
    (e.stream == Stream::kComm ? comm : compute).emplace_back(e.start_ns, e.end_ns);
  }
  return uncovered(merge(std::move(comm)), merge(std::move(compute)));
}

class Scheduler {
 public:
  explicit Scheduler(const TaskGraph& graph) : g_(graph) {}

  Simulation run();

 private:
  struct Completion {
    std::int64_t time;
    std::int64_t task;
    bool operator>(const Completion& o) const {
      return std::tie(time, task) > std::tie(o.time, o.task);
    }
  };

  std::size_t resource(const Task& t) const {
    return static_cast<std::size_t>(t.owner * kLanes + static_cast<std::int64_t>(t.lane));
  }
  std::size_t slot(std::int64_t owner, std::int64_t mb) const {
    return static_cast<std::size_t>(owner * g_.num_microbatches + mb);
  }
  bool counts_for_credit(const Task& t) const { return t.lane == Lane::kCompute; }

  void validate();
  void release(std::int64_t id);
  void dispatch(std::int64_t now);
  void start(std::int64_t id, std::int64_t now);
  std::int64_t pick(std::size_t res) const;
  void complete(std::int64_t id);

  const TaskGraph& g_;
  std::vector<std::int64_t> duration_ns_;
  std::vector<std::vector<std::int64_t>> successors_;
  std::vector<std::int64_t> pending_deps_;
  std::vector<std::int64_t> recv_of_send_;
  std::vector<std::vector<std::int64_t>> pool_;
  std::vector<bool> busy_;
  std::vector<std::size_t> dirty_;
  std::vector<std::int64_t> start_ns_;
  std::vector<std::int64_t> released_ns_;
  std::int64_t now_ = 0;
  // 1F1B bookkeeping per (worker, micro-batch).
  std::vector<bool> started_;
  std::vector<std::int64_t> backward_left_;
  std::vector<std::int64_t> in_flight_;
  std::vector<std::int64_t> credit_;
  std::priority_queue<Completion, std::vector<Completion>, std::greater<>> events_;
  std::int64_t completed_ = 0;
};

void Scheduler::validate() {
  const auto n = static_cast<std::int64_t>(g_.tasks.size());
  const auto workers = static_cast<std::int64_t>(g_.workers.size());
  duration_ns_.resize(g_.tasks.size());
  successors_.resize(g_.tasks.size());
  pending_deps_.resize(g_.tasks.size());
  recv_of_send_.assign(g_.tasks.size(), -1);
  for (const auto& t : g_.tasks) {
    const auto i = static_cast<std::size_t>(&t - g_.tasks.data());
    if (t.id != static_cast<std::int64_t>(i)) {
      throw GraphConstructionError(fmt::format("task at index {} has id {}", i, t.id));
    }
    if (t.owner < 0 || t.owner >= workers) {
      throw GraphConstructionError(
          fmt::format("task {} owned by unknown worker {}", t.id, t.owner));
    }
    if (t.microbatch < 0 || t.microbatch >= std::max<std::int64_t>(g_.num_microbatches, 1)) {
      throw GraphConstructionError(
          fmt::format("task {} has micro-batch {} out of range", t.id, t.microbatch));
    }
    duration_ns_[i] = to_ns(t);
    for (auto d : t.deps) {
      if (d < 0 || d >= n) {
        throw GraphConstructionError(
            fmt::format("task {} depends on unknown task {}", t.id, d));
      }
      successors_[static_cast<std::size_t>(d)].push_back(t.id);
    }
    pending_deps_[i] = static_cast<std::int64_t>(t.deps.size());
    if (t.paired_send >= 0) {
      if (t.paired_send >= n || t.paired_send == t.id) {
        throw GraphConstructionError(
            fmt::format("task {} is paired with unknown send {}", t.id, t.paired_send));
      }
      auto& recv = recv_of_send_[static_cast<std::size_t>(t.paired_send)];
      if (recv >= 0) {
        throw GraphConstructionError(
            fmt::format("send {} is paired with two receives", t.paired_send));
      }
      recv = t.id;
      ++pending_deps_[i];
    }
  }
}

void Scheduler::release(std::int64_t id) {
  const auto res = resource(g_.tasks[static_cast<std::size_t>(id)]);
  pool_[res].push_back(id);
  released_ns_[static_cast<std::size_t>(id)] = now_;
  dirty_.push_back(res);
}

std::int64_t Scheduler::pick(std::size_t res) const {
  const auto owner = static_cast<std::size_t>(res / kLanes);
  const bool prefer_backward = in_flight_[owner] >= credit_[owner];
  // Send and receive lanes serve transfers in arrival order; the priority
  // only separates simultaneous arrivals there.
  const bool fifo = static_cast<std::int64_t>(res) % kLanes !=
                    static_cast<std::int64_t>(Lane::kCompute);
  auto key = [&](std::int64_t id) {
    const Task& t = g_.tasks[static_cast<std::size_t>(id)];
    const bool backward = t.direction == Direction::kBackward;
    return std::make_tuple(fifo ? released_ns_[static_cast<std::size_t>(id)] : 0,
                           backward != prefer_backward, t.microbatch,
                           t.visit.virtual_index,
                           static_cast<int>(t.visit.component), t.id);
  };
  const auto& pool = pool_[res];
  std::int64_t best = pool.front();
  auto best_key = key(best);
  for (std::size_t i = 1; i < pool.size(); ++i) {
    auto k = key(pool[i]);
    if (k < best_key) {
      best = pool[i];
      best_key = k;
    }
  }
  return best;
}

void Scheduler::dispatch(std::int64_t now) {
  // Lower resource index first, so that simultaneous starts are ordered
  // independently of release order.
  while (!dirty_.empty()) {
    std::vector<std::size_t> dirty;
    dirty.swap(dirty_);
    std::sort(dirty.begin(), dirty.end());
    dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
    for (const auto res : dirty) {
      if (busy_[res] || pool_[res].empty()) continue;
      start(pick(res), now);
    }
  }
}

void Scheduler::start(std::int64_t id, std::int64_t now) {
  const Task& t = g_.tasks[static_cast<std::size_t>(id)];
  const auto res = resource(t);
  auto& pool = pool_[res];
  pool.erase(std::find(pool.begin(), pool.end(), id));
  if (counts_for_credit(t) && t.direction == Direction::kForward) {
    const auto s = slot(t.owner, t.microbatch);
    if (!started_[s]) {
      started_[s] = true;
      ++in_flight_[static_cast<std::size_t>(t.owner)];
    }
  }
  busy_[res] = true;
  start_ns_[static_cast<std::size_t>(id)] = now;
  events_.push({now + duration_ns_[static_cast<std::size_t>(id)], id});
  // The receive side of a transfer opens once its send has started.
  if (const auto recv = recv_of_send_[static_cast<std::size_t>(id)];
      recv >= 0 && --pending_deps_[static_cast<std::size_t>(recv)] == 0) {
    release(recv);
  }
}

void Scheduler::complete(std::int64_t id) {
  const Task& t = g_.tasks[static_cast<std::size_t>(id)];
  const auto res = resource(t);
  busy_[res] = false;
  dirty_.push_back(res);
  ++completed_;
  if (counts_for_credit(t) && t.direction == Direction::kBackward) {
    const auto s = slot(t.owner, t.microbatch);
    if (--backward_left_[s] == 0 && started_[s]) {
      --in_flight_[static_cast<std::size_t>(t.owner)];
    }
  }
  for (auto succ : successors_[static_cast<std::size_t>(id)]) {
    if (--pending_deps_[static_cast<std::size_t>(succ)] == 0) release(succ);
  }
}

Simulation Scheduler::run() {
  validate();
  const auto workers = g_.workers.size();
  const auto n = g_.tasks.size();
  pool_.assign(workers * kLanes, {});
  busy_.assign(workers * kLanes, false);
  start_ns_.assign(n, 0);
  released_ns_.assign(n, 0);
  const auto slots = workers * static_cast<std::size_t>(std::max<std::int64_t>(g_.num_microbatches, 1));
  started_.assign(slots, false);
  backward_left_.assign(slots, 0);
  in_flight_.assign(workers, 0);
  credit_.resize(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    credit_[w] = std::max<std::int64_t>(1, g_.pipeline_positions - g_.workers[w].position);
  }
  // Credit = stage visits of a micro-batch from the worker's first visit on,
  // read off micro-batch 0's forward chain. With interleaving a micro-batch
  // passes every worker several times, which a plain position count misses.
  std::vector<std::int64_t> first_visit(workers, -1);
  std::int64_t visits = 0;
  std::int64_t last_owner = -1;
  for (const auto& t : g_.tasks) {
    if (t.microbatch != 0 || !counts_for_credit(t) || t.direction != Direction::kForward) continue;
    if (t.owner == last_owner) continue;
    last_owner = t.owner;
    auto& first = first_visit[static_cast<std::size_t>(t.owner)];
    if (first < 0) first = visits;
    ++visits;
  }
  for (std::size_t w = 0; w < workers; ++w) {
    if (first_visit[w] >= 0) credit_[w] = visits - first_visit[w];
  }
  for (const auto& t : g_.tasks) {
    if (counts_for_credit(t) && t.direction == Direction::kBackward) {
      ++backward_left_[slot(t.owner, t.microbatch)];
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (pending_deps_[i] == 0) release(static_cast<std::int64_t>(i));
  }
  std::int64_t now = 0;
  dispatch(now);
  while (!events_.empty()) {
    now = events_.top().time;
    now_ = now;
    while (!events_.empty() && events_.top().time == now) {
      const auto id = events_.top().task;
      events_.pop();
      complete(id);
    }
    dispatch(now);
  }
  if (completed_ != static_cast<std::int64_t>(n)) {
    throw CycleDetected(fmt::format("{} of {} tasks can never run",
                                    static_cast<std::int64_t>(n) - completed_, n));
  }

  Simulation sim;
  auto& trace = sim.trace;
  for (const auto& w : g_.workers) trace.workers.push_back(w.name);
  trace.events.reserve(n);
  for (const auto& t : g_.tasks) {
    const auto i = static_cast<std::size_t>(t.id);
    trace.events.push_back({t.id, t.owner, t.stream, t.lane, t.kind, t.microbatch,
                            t.visit.layer, start_ns_[i], start_ns_[i] + duration_ns_[i]});
    trace.iteration_time_ns = std::max(trace.iteration_time_ns, trace.events.back().end_ns);
  }
  std::sort(trace.events.begin(), trace.events.end(), [](const auto& a, const auto& b) {
    return std::tie(a.start_ns, a.task_id) < std::tie(b.start_ns, b.task_id);
  });

  auto& r = sim.result;
  r.iteration_time = trace.iteration_time();
  std::vector<std::int64_t> busy(workers, 0);
  std::int64_t last_position = -1;
  for (const auto& w : g_.workers) last_position = std::max(last_position, w.position);
  std::int64_t first_on_last = -1;
  for (const auto& e : trace.events) {
    if (e.lane != Lane::kCompute) continue;
    busy[static_cast<std::size_t>(e.owner)] += e.end_ns - e.start_ns;
    if (e.stream != Stream::kComm &&
        g_.workers[static_cast<std::size_t>(e.owner)].position == last_position &&
        first_on_last < 0) {
      first_on_last = e.start_ns;
    }
  }
  std::int64_t total_busy = 0;
  for (std::size_t w = 0; w < workers; ++w) {
    r.per_group_busy.emplace_back(g_.workers[w].name, static_cast<double>(busy[w]) * 1e-9);
    total_busy += busy[w];
  }
  if (trace.iteration_time_ns > 0 && workers > 0) {
    const double capacity = static_cast<double>(trace.iteration_time_ns) *
                            static_cast<double>(workers);
    r.bubble_fraction = std::clamp(1.0 - static_cast<double>(total_busy) / capacity, 0.0, 1.0);
  }
  if (first_on_last > 0) {
    r.bubble_warmup = static_cast<double>(first_on_last) * 1e-9 /
                      static_cast<double>(std::max<std::int64_t>(1, g_.workers_per_stage_slot));
  }
  r.exposed_comm = static_cast<double>(exposed_comm_ns(trace)) * 1e-9;
  if (r.iteration_time > 0.0 && g_.useful_flops > 0.0 && g_.world_size > 0 &&
      g_.peak_flops > 0.0) {
    // Clamped because durations are rounded to whole nanoseconds.
    r.mfu = std::min(1.0, g_.useful_flops / (r.iteration_time *
                                             static_cast<double>(g_.world_size) *
                                             g_.peak_flops));
  }
  spdlog::debug("simulated {} tasks on {} workers: {:.6g} ms", n, workers,
                r.iteration_time * 1e3);
  return sim;
}

}  // namespace

Simulation simulate(const TaskGraph& graph) { return Scheduler(graph).run(); }

double exposed_comm(const ScheduleTrace& trace) {
  return static_cast<double>(exposed_comm_ns(trace)) * 1e-9;
}

double warmup_bubble_analytic(ScheduleKind kind, const StageTimes& t,
                              std::int64_t pipeline_depth,
                              std::int64_t virtual_stages,
                              std::int64_t layers_per_stage) {
  if (pipeline_depth < 1 || virtual_stages < 1 || layers_per_stage < 0) {
    throw std::invalid_argument(fmt::format(
        "warmup bubble needs PP >= 1 and v >= 1 (got PP={}, v={}, L={})",
        pipeline_depth, virtual_stages, layers_per_stage));
  }
  const double slots = static_cast<double>(pipeline_depth - 1);
  const double v = static_cast<double>(virtual_stages);
  const double layers = static_cast<double>(layers_per_stage);
  switch (kind) {
    case ScheduleKind::kMegatron1F1B:
      return slots * (layers * (t.t_attn + t.t_ffn + 2.0 * t.t_a2a) + t.t_p2p) / v;
    case ScheduleKind::kChunkedOverlap:
      return slots * (layers * (t.t_attn + std::max(t.t_ffn, 2.0 * t.t_a2a)) + t.t_p2p) / v;
    case ScheduleKind::kAfPipe:
      return slots * (std::max(t.t_attn, t.t_ffn) + t.t_m2n) / (2.0 * v);
    case ScheduleKind::kNaiveSequential:
      return 0.0;
  }
  return 0.0;
}

double chunked_overlap_layer_time(const StageTimes& t) {
  return t.t_attn + std::max(t.t_ffn, 2.0 * t.t_a2a);
}

double chunked_overlap_exposed(const StageTimes& t) {
  return std::max(0.0, 2.0 * t.t_a2a - t.t_ffn);
}

}  // namespace afpipe
