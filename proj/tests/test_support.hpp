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

#pragma once

// Independent reference computations and checkers shared by the tests.
// Nothing here calls the library's formulas.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>
#include <fmt/format.h>

#include "afpipe/experiment.hpp"
#include "afpipe/simulator.hpp"
#include "afpipe/task_graph.hpp"

namespace afpipe::testing {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline Rational q(std::int64_t v) { return Rational(v); }

// b (s H^2 (2 + 2/g) + 4 s^2 H)
inline Rational oracle_attention_flops(std::int64_t b, std::int64_t s,
                                       std::int64_t H, std::int64_t g) {
  return q(b) * (q(s) * q(H) * q(H) * (q(2) + Rational(2, g)) + q(4) * q(s) * q(s) * q(H));
}

inline Rational oracle_ffn_flops(std::int64_t b, std::int64_t k, std::int64_t s,
                                 std::int64_t H, std::int64_t De) {
  return q(4) * q(b) * q(k) * q(s) * q(H) * q(De);
}

inline Rational oracle_comm_bytes(std::int64_t e, std::int64_t b, std::int64_t s,
                                  std::int64_t k, std::int64_t H) {
  return q(e) * q(b) * q(s) * q(k) * q(H);
}

inline std::int64_t divisors_up_to(std::int64_t x, std::int64_t cap) {
  std::int64_t n = 0;
  for (std::int64_t d = 1; d <= cap; ++d) n += (x % d == 0) ? 1 : 0;
  return n;
}

// Size of the feasible allocation set, counted from the constraint
// definitions rather than enumerated.
inline std::int64_t oracle_allocation_count(std::int64_t W, std::int64_t Mtot,
                                            std::int64_t cap) {
  if (W < 2 || Mtot < 2) return 0;
  std::int64_t shapes = 0;
  for (std::int64_t M = 1; M < W; ++M) {
    shapes += divisors_up_to(M, cap) * divisors_up_to(W - M, cap);
  }
  return shapes * (Mtot - 1);
}

inline std::int64_t duration_ns(const Task& t) { return std::llround(t.duration * 1e9); }

// Longest dependency chain of the graph in integer nanoseconds.
inline std::int64_t critical_path_ns(const TaskGraph& g) {
  std::vector<std::int64_t> finish(g.tasks.size(), 0);
  // Builders emit tasks in topological order; verify while computing.
  for (const auto& t : g.tasks) {
    std::int64_t ready = 0;
    for (auto d : t.deps) {
      if (d >= t.id) return -1;
      ready = std::max(ready, finish[static_cast<std::size_t>(d)]);
    }
    finish[static_cast<std::size_t>(t.id)] = ready + duration_ns(t);
  }
  return g.tasks.empty() ? 0 : *std::max_element(finish.begin(), finish.end());
}

// Every violated schedule invariant, as readable messages.
inline std::vector<std::string> trace_violations(const TaskGraph& g,
                                                 const ScheduleTrace& trace) {
  std::vector<std::string> out;
  std::map<std::int64_t, const TraceEvent*> by_task;
  for (const auto& e : trace.events) {
    if (!by_task.emplace(e.task_id, &e).second) {
      out.push_back(fmt::format("task {} scheduled twice", e.task_id));
    }
  }
  if (by_task.size() != g.tasks.size()) {
    out.push_back(fmt::format("{} tasks, {} scheduled", g.tasks.size(), by_task.size()));
  }
  for (const auto& t : g.tasks) {
    auto it = by_task.find(t.id);
    if (it == by_task.end()) {
      out.push_back(fmt::format("task {} never scheduled", t.id));
      continue;
    }
    const TraceEvent& e = *it->second;
    if (e.end_ns - e.start_ns != duration_ns(t)) {
      out.push_back(fmt::format("task {} runs {} ns, expected {}", t.id, e.end_ns - e.start_ns,
                                duration_ns(t)));
    }
    if (e.owner != t.owner || e.lane != t.lane || e.stream != t.stream) {
      out.push_back(fmt::format("task {} placed on the wrong resource", t.id));
    }
    for (auto d : t.deps) {
      auto dep = by_task.find(d);
      if (dep != by_task.end() && dep->second->end_ns > e.start_ns) {
        out.push_back(fmt::format("task {} starts before dependency {} ends", t.id, d));
      }
    }
    if (t.paired_send >= 0) {
      auto send = by_task.find(t.paired_send);
      if (send != by_task.end() && send->second->start_ns > e.start_ns) {
        out.push_back(fmt::format("receive {} starts before its send", t.id));
      }
    }
    if (e.end_ns > trace.iteration_time_ns) {
      out.push_back(fmt::format("task {} ends after the iteration", t.id));
    }
  }
  std::map<std::pair<std::int64_t, int>, std::vector<std::pair<std::int64_t, std::int64_t>>> lanes;
  for (const auto& e : trace.events) {
    lanes[{e.owner, static_cast<int>(e.lane)}].emplace_back(e.start_ns, e.end_ns);
  }
  for (auto& [key, spans] : lanes) {
    std::sort(spans.begin(), spans.end());
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].first < spans[i - 1].second) {
        out.push_back(fmt::format("overlap on worker {} lane {}", key.first, key.second));
      }
    }
  }
  return out;
}

// Sum of durations per (worker, lane), the trivial makespan lower bound.
inline std::int64_t busiest_resource_ns(const TaskGraph& g) {
  std::map<std::pair<std::int64_t, int>, std::int64_t> load;
  for (const auto& t : g.tasks) load[{t.owner, static_cast<int>(t.lane)}] += duration_ns(t);
  std::int64_t best = 0;
  for (const auto& [k, v] : load) best = std::max(best, v);
  return best;
}

// A small random but valid experiment; `kind` fixed by the caller.
inline Experiment random_experiment(std::mt19937_64& rng, ScheduleKind kind,
                                    std::int64_t max_gpus = 16) {
  auto U = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  Experiment e;
  e.model.layers = U(1, 8);
  e.model.hidden = 256 * U(1, 8);
  e.model.experts = 16;
  e.model.topk = U(1, 4);
  e.model.moe_hidden = 128 * U(1, 16);
  e.model.gqa_group = U(1, 2) == 1 ? 1 : 4;
  e.workload.seq_len = 512 * U(1, 16);
  e.workload.micro_batch = U(1, 2);
  e.workload.num_microbatches = U(1, 8);
  e.cluster.total_gpus = U(2, max_gpus);
  e.cluster.gpus_per_node = U(1, 8);
  e.cluster.total_nics = U(2, max_gpus);
  e.cluster.gpu_peak = 1e12 * static_cast<double>(U(100, 1000));
  e.cluster.ib_bw = 1e9 * static_cast<double>(U(10, 100));
  e.schedule_kind = kind;
  e.pipeline_depth = U(1, std::min<std::int64_t>(4, e.model.layers));
  e.virtual_stages = U(1, e.model.layers / e.pipeline_depth);
  e.ep_size = U(1, e.cluster.total_gpus);
  return e;
}

}  // namespace afpipe::testing
