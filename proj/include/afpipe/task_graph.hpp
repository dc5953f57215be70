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
#include <string_view>
#include <vector>

#include "afpipe/allocation.hpp"
#include "afpipe/cost_model.hpp"
#include "afpipe/experiment.hpp"
#include "afpipe/placement.hpp"

namespace afpipe {

enum class TaskKind { kFwdCompute, kBwdCompute, kM2NSend, kM2NRecv, kA2A, kP2P };
enum class Stream { kForward, kBackward, kComm };
// Physical resource inside a worker. Forward and Backward streams share the
// compute engine; the Comm stream has one send and one receive lane.
// Baseline all-to-all is blocking and runs on the compute engine.
enum class Lane { kCompute, kSend, kRecv };
enum class Direction { kForward, kBackward };

std::string_view to_string(TaskKind kind);
std::string_view to_string(Stream stream);
std::string_view to_string(Lane lane);

struct LayerVisit {
  std::int64_t group = 0;
  std::int64_t virtual_index = 0;  // position of the layer inside its group
  Component component = Component::kAttention;
  std::int64_t layer = 0;
};

struct Task {
  std::int64_t id = 0;
  TaskKind kind = TaskKind::kFwdCompute;
  std::int64_t owner = 0;
  Stream stream = Stream::kForward;
  Lane lane = Lane::kCompute;
  std::int64_t microbatch = 0;
  LayerVisit visit;
  Direction direction = Direction::kForward;
  double duration = 0.0;  // seconds
  std::vector<std::int64_t> deps;
  // Receive side of a transfer: may not start before this send starts.
  std::int64_t paired_send = -1;
};

struct Worker {
  std::string name;
  // Index in the forward stage order: A_g -> 2g, F_g -> 2g + 1 for the
  // disaggregated layouts, stage i -> i for the baselines.
  std::int64_t position = 0;
};

struct TaskGraph {
  ScheduleKind kind = ScheduleKind::kAfPipe;
  std::vector<Worker> workers;
  std::vector<Task> tasks;
  std::int64_t num_microbatches = 0;
  std::int64_t pipeline_positions = 1;
  // Workers that time-share one pipeline stage slot: 2 for the A/F pair,
  // 1 for a baseline stage. Divides the measured warmup bubble.
  std::int64_t workers_per_stage_slot = 1;
  // Forward plus backward model FLOPs of the whole iteration; 0 disables MFU.
  double useful_flops = 0.0;
  std::int64_t world_size = 0;
  double peak_flops = 0.0;
};

// Durations of one layer visit, in seconds, for the owning worker's share
// of the cluster.
struct LayerDurations {
  double attn_fwd = 0.0;
  double ffn_fwd = 0.0;
  double attn_bwd = 0.0;
  double ffn_bwd = 0.0;
  double m2n = 0.0;  // disaggregated layouts, one direction
  double a2a = 0.0;  // baselines, one dispatch or combine
  double p2p = 0.0;  // baselines, hidden state between stages
};

struct PipelineShape {
  ScheduleKind kind = ScheduleKind::kAfPipe;
  std::int64_t layers = 1;
  std::int64_t pipeline_depth = 1;
  std::int64_t virtual_stages = 1;  // baselines: chunks per stage
  std::int64_t num_microbatches = 1;
};

// Per-visit durations for `exp.schedule_kind`. Disaggregated kinds give
// each of the p groups 1/p of the component's GPUs and NICs; baselines give
// each stage W/p GPUs and M_tot/p NICs.
LayerDurations layer_durations(const Experiment& exp, const Allocation& alloc);

// Builds the graph from explicit durations. The disaggregated kinds use the
// interleaved assignment (layer l -> group l mod p).
TaskGraph build_schedule_graph(const PipelineShape& shape,
                               const LayerDurations& durations);

// Full construction from an experiment. The plans must match
// assign_layers(L, p, ...) for the disaggregated kinds; throws
// GraphConstructionError otherwise.
TaskGraph build_task_graph(const Experiment& exp, const Allocation& alloc,
                           const PlacementPlan& plan_a,
                           const PlacementPlan& plan_f);

}  // namespace afpipe
