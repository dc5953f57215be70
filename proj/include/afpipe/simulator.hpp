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

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "afpipe/cost_model.hpp"
#include "afpipe/experiment.hpp"
#include "afpipe/task_graph.hpp"

namespace afpipe {

struct TraceEvent {
  std::int64_t task_id = 0;
  std::int64_t owner = 0;
  Stream stream = Stream::kForward;
  Lane lane = Lane::kCompute;
  TaskKind kind = TaskKind::kFwdCompute;
  std::int64_t microbatch = 0;
  std::int64_t layer = 0;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;

  double start() const { return static_cast<double>(start_ns) * 1e-9; }
  double end() const { return static_cast<double>(end_ns) * 1e-9; }
  friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct ScheduleTrace {
  std::vector<std::string> workers;  // indexed by TraceEvent::owner
  std::vector<TraceEvent> events;    // sorted by (start, task id)
  std::int64_t iteration_time_ns = 0;

  double iteration_time() const {
    return static_cast<double>(iteration_time_ns) * 1e-9;
  }
  friend bool operator==(const ScheduleTrace&, const ScheduleTrace&) = default;
};

struct SimResult {
  double iteration_time = 0.0;
  // Start of the first compute on the last pipeline position, divided by
  // the workers sharing a stage slot.
  double bubble_warmup = 0.0;
  // Idle share of the compute engines over the iteration.
  double bubble_fraction = 0.0;
  double exposed_comm = 0.0;
  double mfu = 0.0;
  // Compute-engine busy time per worker, in worker order.
  std::vector<std::pair<std::string, double>> per_group_busy;
};

struct Simulation {
  ScheduleTrace trace;
  SimResult result;
};

// Event-driven list scheduling. Each (worker, lane) runs one task at a time.
// Ready tasks compete by: 1F1B direction preference, micro-batch, virtual
// index, component (A before F), task id.
//
// Throws NegativeDuration, GraphConstructionError on dangling dependencies
// and CycleDetected when some task can never become ready.
Simulation simulate(const TaskGraph& graph);

// Time during which some Comm-stream task runs while no compute task runs
// anywhere.
double exposed_comm(const ScheduleTrace& trace);

// Closed-form warmup bubble. `pipeline_depth` counts pipeline stage slots;
// for AF-Pipe that is 2p. NaiveSequential is not pipelined and yields 0.
double warmup_bubble_analytic(ScheduleKind kind, const StageTimes& times,
                              std::int64_t pipeline_depth,
                              std::int64_t virtual_stages,
                              std::int64_t layers_per_stage);

// T_a + max(T_f, 2 T_a2a).
double chunked_overlap_layer_time(const StageTimes& times);
// max(0, 2 T_a2a - T_f).
double chunked_overlap_exposed(const StageTimes& times);

}  // namespace afpipe
