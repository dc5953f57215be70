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

#include "afpipe/task_graph.hpp"

#include <algorithm>
#include <functional>

#include <fmt/format.h>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace {

using Deps = std::vector<std::int64_t>;
using GroupOf = std::function<std::int64_t(std::int64_t layer)>;

bool disaggregated(ScheduleKind kind) {
  return kind == ScheduleKind::kAfPipe || kind == ScheduleKind::kNaiveSequential;
}

class GraphBuilder {
 public:
  explicit GraphBuilder(TaskGraph& graph) : graph_(graph) {}

  std::int64_t add(TaskKind kind, std::int64_t owner, std::int64_t microbatch,
                   LayerVisit visit, Direction direction, double duration,
                   Deps deps) {
    Task task;
    task.id = static_cast<std::int64_t>(graph_.tasks.size());
    task.kind = kind;
    task.owner = owner;
    task.microbatch = microbatch;
    task.visit = visit;
    task.direction = direction;
    task.duration = duration;
    task.deps = std::move(deps);
    switch (kind) {
      case TaskKind::kFwdCompute:
        task.stream = Stream::kForward;
        task.lane = Lane::kCompute;
        break;
      case TaskKind::kBwdCompute:
        task.stream = Stream::kBackward;
        task.lane = Lane::kCompute;
        break;
      case TaskKind::kA2A:
        task.stream = Stream::kComm;
        task.lane = Lane::kCompute;
        break;
      case TaskKind::kM2NSend:
      case TaskKind::kM2NRecv:
      case TaskKind::kP2P:
        task.stream = Stream::kComm;
        task.lane = kind == TaskKind::kM2NRecv ? Lane::kRecv : Lane::kSend;
        break;
    }
    graph_.tasks.push_back(std::move(task));
    return graph_.tasks.back().id;
  }

  // Send on `from`, receive on `to`; both start once `deps` are done.
  Deps transfer(TaskKind send_kind, std::int64_t from, std::int64_t to,
                std::int64_t microbatch, LayerVisit visit, Direction direction,
                double duration, const Deps& deps) {
    const auto send =
        add(send_kind, from, microbatch, visit, direction, duration, deps);
    const auto recv_kind =
        send_kind == TaskKind::kP2P ? TaskKind::kP2P : TaskKind::kM2NRecv;
    const auto recv =
        add(recv_kind, to, microbatch, visit, direction, duration, deps);
    auto& r = graph_.tasks[static_cast<std::size_t>(recv)];
    r.lane = Lane::kRecv;
    r.paired_send = send;
    return {send, recv};
  }

 private:
  TaskGraph& graph_;
};

// Position of `layer` inside its group under the interleaved assignment.
std::int64_t index_in_group(const std::vector<LayerGroup>& groups,
                            std::int64_t group, std::int64_t layer) {
  const auto& layers = groups[static_cast<std::size_t>(group)].layers;
  const auto it = std::find(layers.begin(), layers.end(), layer);
  return static_cast<std::int64_t>(it - layers.begin());
}

void build_disaggregated(TaskGraph& graph, const PipelineShape& shape,
                         const LayerDurations& d, const PlacementPlan& plan_a,
                         const PlacementPlan& plan_f) {
  const std::int64_t p = shape.pipeline_depth;
  const std::int64_t layers = shape.layers;
  for (std::int64_t g = 0; g < p; ++g) {
    graph.workers.push_back({fmt::format("A{}", g), 2 * g});
  }
  for (std::int64_t g = 0; g < p; ++g) {
    graph.workers.push_back({fmt::format("F{}", g), 2 * g + 1});
  }
  graph.pipeline_positions = 2 * p;
  graph.workers_per_stage_slot = 2;

  std::vector<std::int64_t> group_a(static_cast<std::size_t>(layers));
  std::vector<std::int64_t> group_f(static_cast<std::size_t>(layers));
  for (const auto& g : plan_a.groups) {
    for (auto l : g.layers) group_a[static_cast<std::size_t>(l)] = g.id;
  }
  for (const auto& g : plan_f.groups) {
    for (auto l : g.layers) group_f[static_cast<std::size_t>(l)] = g.id;
  }
  auto a_visit = [&](std::int64_t l) {
    const auto g = group_a[static_cast<std::size_t>(l)];
    return LayerVisit{g, index_in_group(plan_a.groups, g, l),
                      Component::kAttention, l};
  };
  auto f_visit = [&](std::int64_t l) {
    const auto g = group_f[static_cast<std::size_t>(l)];
    return LayerVisit{g, index_in_group(plan_f.groups, g, l), Component::kFfn, l};
  };
  auto a_owner = [&](std::int64_t l) { return group_a[static_cast<std::size_t>(l)]; };
  auto f_owner = [&](std::int64_t l) {
    return p + group_f[static_cast<std::size_t>(l)];
  };

  GraphBuilder b(graph);
  constexpr auto kFwd = Direction::kForward;
  constexpr auto kBwd = Direction::kBackward;
  for (std::int64_t mb = 0; mb < shape.num_microbatches; ++mb) {
    Deps into_attention;
    Deps into_ffn_bwd;
    for (std::int64_t l = 0; l < layers; ++l) {
      const auto attn = b.add(TaskKind::kFwdCompute, a_owner(l), mb, a_visit(l),
                              kFwd, d.attn_fwd, into_attention);
      const auto dispatched =
          b.transfer(TaskKind::kM2NSend, a_owner(l), f_owner(l), mb, a_visit(l),
                     kFwd, d.m2n, {attn});
      const auto ffn = b.add(TaskKind::kFwdCompute, f_owner(l), mb, f_visit(l),
                             kFwd, d.ffn_fwd, dispatched);
      if (l + 1 < layers) {
        into_attention = b.transfer(TaskKind::kM2NSend, f_owner(l),
                                    a_owner(l + 1), mb, f_visit(l), kFwd, d.m2n,
                                    {ffn});
      } else {
        // The loss is computed where the last FFN block lives.
        into_ffn_bwd = {ffn};
      }
    }
    for (std::int64_t l = layers - 1; l >= 0; --l) {
      const auto ffn = b.add(TaskKind::kBwdCompute, f_owner(l), mb, f_visit(l),
                             kBwd, d.ffn_bwd, into_ffn_bwd);
      const auto grads = b.transfer(TaskKind::kM2NSend, f_owner(l), a_owner(l),
                                    mb, f_visit(l), kBwd, d.m2n, {ffn});
      const auto attn = b.add(TaskKind::kBwdCompute, a_owner(l), mb, a_visit(l),
                              kBwd, d.attn_bwd, grads);
      if (l > 0) {
        into_ffn_bwd = b.transfer(TaskKind::kM2NSend, a_owner(l),
                                  f_owner(l - 1), mb, a_visit(l), kBwd, d.m2n,
                                  {attn});
      }
    }
  }

  if (shape.kind == ScheduleKind::kNaiveSequential) {
    // Tasks were created in a topological order; chaining them in that
    // order runs exactly one task at a time.
    for (std::size_t i = 1; i < graph.tasks.size(); ++i) {
      graph.tasks[i].deps.push_back(static_cast<std::int64_t>(i - 1));
    }
  }
}

void build_baseline(TaskGraph& graph, const PipelineShape& shape,
                    const LayerDurations& d) {
  const std::int64_t p = shape.pipeline_depth;
  const std::int64_t chunks = p * shape.virtual_stages;
  for (std::int64_t s = 0; s < p; ++s) {
    graph.workers.push_back({fmt::format("S{}", s), s});
  }
  graph.pipeline_positions = p;
  graph.workers_per_stage_slot = 1;

  auto chunk_begin = [&](std::int64_t j) { return j * shape.layers / chunks; };
  const bool chunked = shape.kind == ScheduleKind::kChunkedOverlap;
  GraphBuilder b(graph);

  // One layer on `stage`, forward or backward; returns the new frontier.
  auto layer = [&](std::int64_t stage, std::int64_t chunk, std::int64_t l,
                   std::int64_t mb, Direction dir, Deps deps) -> Deps {
    const LayerVisit attn_visit{stage, chunk / p, Component::kAttention, l};
    const LayerVisit ffn_visit{stage, chunk / p, Component::kFfn, l};
    const bool fwd = dir == Direction::kForward;
    const auto compute = fwd ? TaskKind::kFwdCompute : TaskKind::kBwdCompute;
    const double attn_time = fwd ? d.attn_fwd : d.attn_bwd;
    const double ffn_time = fwd ? d.ffn_fwd : d.ffn_bwd;
    auto step = [&](TaskKind kind, const LayerVisit& visit, double duration) {
      if (kind == TaskKind::kA2A && duration <= 0.0) return;
      deps = {b.add(kind, stage, mb, visit, dir, duration, deps)};
    };
    if (chunked) {
      // Dispatch/combine hide behind the FFN GEMMs; only the tail that
      // outlasts them stays on the critical path.
      const double tail = std::max(0.0, 2.0 * d.a2a - ffn_time);
      if (fwd) {
        step(compute, attn_visit, attn_time);
        step(compute, ffn_visit, ffn_time);
        step(TaskKind::kA2A, ffn_visit, tail);
      } else {
        step(compute, ffn_visit, ffn_time);
        step(TaskKind::kA2A, ffn_visit, tail);
        step(compute, attn_visit, attn_time);
      }
    } else if (fwd) {
      step(compute, attn_visit, attn_time);
      step(TaskKind::kA2A, ffn_visit, d.a2a);
      step(compute, ffn_visit, ffn_time);
      step(TaskKind::kA2A, ffn_visit, d.a2a);
    } else {
      step(TaskKind::kA2A, ffn_visit, d.a2a);
      step(compute, ffn_visit, ffn_time);
      step(TaskKind::kA2A, ffn_visit, d.a2a);
      step(compute, attn_visit, attn_time);
    }
    return deps;
  };

  for (std::int64_t mb = 0; mb < shape.num_microbatches; ++mb) {
    Deps frontier;
    for (std::int64_t j = 0; j < chunks; ++j) {
      const std::int64_t stage = j % p;
      for (std::int64_t l = chunk_begin(j); l < chunk_begin(j + 1); ++l) {
        frontier = layer(stage, j, l, mb, Direction::kForward, frontier);
      }
      if (j + 1 < chunks && (j + 1) % p != stage) {
        const LayerVisit visit{stage, j / p, Component::kFfn, chunk_begin(j + 1) - 1};
        frontier = b.transfer(TaskKind::kP2P, stage, (j + 1) % p, mb, visit,
                              Direction::kForward, d.p2p, frontier);
      }
    }
    for (std::int64_t j = chunks - 1; j >= 0; --j) {
      const std::int64_t stage = j % p;
      for (std::int64_t l = chunk_begin(j + 1) - 1; l >= chunk_begin(j); --l) {
        frontier = layer(stage, j, l, mb, Direction::kBackward, frontier);
      }
      if (j > 0 && (j - 1) % p != stage) {
        const LayerVisit visit{stage, j / p, Component::kAttention, chunk_begin(j)};
        frontier = b.transfer(TaskKind::kP2P, stage, (j - 1) % p, mb, visit,
                              Direction::kBackward, d.p2p, frontier);
      }
    }
  }
}

TaskGraph build(const PipelineShape& shape, const LayerDurations& durations,
                const PlacementPlan* plan_a, const PlacementPlan* plan_f) {
  if (shape.layers < 1 || shape.pipeline_depth < 1 ||
      shape.pipeline_depth > shape.layers || shape.virtual_stages < 1 ||
      shape.num_microbatches < 0) {
    throw GraphConstructionError(fmt::format(
        "invalid pipeline shape L={} p={} v={} microbatches={}", shape.layers,
        shape.pipeline_depth, shape.virtual_stages, shape.num_microbatches));
  }
  TaskGraph graph;
  graph.kind = shape.kind;
  graph.num_microbatches = shape.num_microbatches;
  if (disaggregated(shape.kind)) {
    if (plan_a != nullptr && plan_f != nullptr) {
      build_disaggregated(graph, shape, durations, *plan_a, *plan_f);
    } else {
      const auto a = assign_layers(shape.layers, shape.pipeline_depth,
                                   Component::kAttention);
      const auto f =
          assign_layers(shape.layers, shape.pipeline_depth, Component::kFfn);
      build_disaggregated(graph, shape, durations, a, f);
    }
  } else {
    if (shape.pipeline_depth * shape.virtual_stages > shape.layers) {
      throw GraphConstructionError(
          "pipeline_depth * virtual_stages exceeds the layer count");
    }
    build_baseline(graph, shape, durations);
  }
  return graph;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kFwdCompute:
      return "fwd";
    case TaskKind::kBwdCompute:
      return "bwd";
    case TaskKind::kM2NSend:
      return "m2n_send";
    case TaskKind::kM2NRecv:
      return "m2n_recv";
    case TaskKind::kA2A:
      return "a2a";
    case TaskKind::kP2P:
      return "p2p";
  }
  return "unknown";
}

std::string_view to_string(Stream stream) {
  switch (stream) {
    case Stream::kForward:
      return "forward";
    case Stream::kBackward:
      return "backward";
    case Stream::kComm:
      return "comm";
  }
  return "unknown";
}

std::string_view to_string(Lane lane) {
  switch (lane) {
    case Lane::kCompute:
      return "compute";
    case Lane::kSend:
      return "send";
    case Lane::kRecv:
      return "recv";
  }
  return "unknown";
}

LayerDurations layer_durations(const Experiment& exp, const Allocation& alloc) {
  const StageInputs in = stage_inputs(exp);
  const auto& c = exp.cluster;
  const double p = static_cast<double>(exp.pipeline_depth);
  const double mult = exp.backward_multiplier;
  LayerDurations d;
  if (disaggregated(exp.schedule_kind)) {
    const StageTimes t = stage_times(in, alloc, c, exp.pipeline_depth);
    d.attn_fwd = p * in.attn_flops / (c.gpu_peak * static_cast<double>(alloc.attn_gpus));
    d.ffn_fwd = p * in.ffn_flops / (c.gpu_peak * static_cast<double>(alloc.ffn_gpus));
    d.m2n = p * t.t_m2n;
  } else {
    const double stage_gpus = static_cast<double>(c.total_gpus) / p;
    d.attn_fwd = in.attn_flops / (c.gpu_peak * stage_gpus);
    d.ffn_fwd = in.ffn_flops / (c.gpu_peak * stage_gpus);
    // Only the a2a and p2p terms are used; they do not depend on the split.
    const Allocation any = make_allocation(1, 1, c.total_gpus, c.total_nics,
                                           c.gpus_per_node);
    const StageTimes t = stage_times(in, any, c, exp.pipeline_depth);
    d.a2a = t.t_a2a;
    d.p2p = t.t_p2p;
  }
  d.attn_bwd = backward_scale(d.attn_fwd, mult);
  d.ffn_bwd = backward_scale(d.ffn_fwd, mult);
  return d;
}

TaskGraph build_schedule_graph(const PipelineShape& shape,
                               const LayerDurations& durations) {
  return build(shape, durations, nullptr, nullptr);
}

TaskGraph build_task_graph(const Experiment& exp, const Allocation& alloc,
                           const PlacementPlan& plan_a,
                           const PlacementPlan& plan_f) {
  const std::int64_t layers = exp.model.layers;
  auto check_plan = [&](const PlacementPlan& plan, Component expected) {
    if (plan.component != expected) {
      throw GraphConstructionError(fmt::format(
          "expected a {} plan, got {}", to_string(expected),
          to_string(plan.component)));
    }
    if (plan.pipeline_depth != exp.pipeline_depth) {
      throw GraphConstructionError(fmt::format(
          "plan depth {} does not match pipeline_depth {}", plan.pipeline_depth,
          exp.pipeline_depth));
    }
    if (const auto problems = validate_partition(plan, layers); !problems.empty()) {
      throw GraphConstructionError("invalid plan: " + problems.front());
    }
    if (disaggregated(exp.schedule_kind) &&
        plan.groups != assign_layers(layers, exp.pipeline_depth, expected).groups) {
      throw GraphConstructionError(
          "plan does not follow the interleaved layer assignment");
    }
  };
  check_plan(plan_a, Component::kAttention);
  check_plan(plan_f, Component::kFfn);
  if (disaggregated(exp.schedule_kind)) {
    const auto problems =
        allocation_violations(alloc, exp.cluster.total_gpus,
                              exp.cluster.total_nics, exp.cluster.gpus_per_node);
    if (!problems.empty()) {
      throw GraphConstructionError("invalid allocation: " + problems.front());
    }
  }

  const PipelineShape shape{exp.schedule_kind, layers, exp.pipeline_depth,
                            exp.virtual_stages, exp.workload.num_microbatches};
  TaskGraph graph = build(shape, layer_durations(exp, alloc), &plan_a, &plan_f);
  const double per_layer = attention_flops(exp.model, exp.workload) +
                           static_cast<double>(ffn_flops(exp.model, exp.workload));
  graph.useful_flops = per_layer * static_cast<double>(layers) *
                       static_cast<double>(exp.workload.num_microbatches) *
                       (1.0 + exp.backward_multiplier);
  graph.world_size = exp.cluster.total_gpus;
  graph.peak_flops = exp.cluster.gpu_peak;
  return graph;
}

}  // namespace afpipe
