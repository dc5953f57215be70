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

#include "afpipe/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "afpipe/cost_model.hpp"
#include "afpipe/errors.hpp"
#include "afpipe/task_graph.hpp"

namespace afpipe {
namespace {

using nlohmann::json;

bool disaggregated(ScheduleKind kind) {
  return kind == ScheduleKind::kAfPipe || kind == ScheduleKind::kNaiveSequential;
}

double a2a_share_of(const ScheduleTrace& trace) {
  std::int64_t a2a = 0;
  std::int64_t busy = 0;
  for (const auto& e : trace.events) {
    if (e.lane != Lane::kCompute) continue;
    busy += e.end_ns - e.start_ns;
    if (e.kind == TaskKind::kA2A) a2a += e.end_ns - e.start_ns;
  }
  return busy > 0 ? static_cast<double>(a2a) / static_cast<double>(busy) : 0.0;
}

std::string gigabytes(double bytes) { return fmt::format("{:.4g} GB", bytes / 1e9); }

Allocation share_allocation(const Experiment& exp, double share) {
  const auto& c = exp.cluster;
  const auto M = std::clamp<std::int64_t>(
      std::llround(share * static_cast<double>(c.total_gpus)), 1, c.total_gpus - 1);
  const auto Ma = std::clamp<std::int64_t>(c.total_nics / 2, 1, c.total_nics - 1);
  return make_allocation(M, Ma, c.total_gpus, c.total_nics, c.gpus_per_node);
}

}  // namespace

ScheduleOutcome run_schedule(const Experiment& exp, ScheduleKind kind,
                             const Allocation& alloc) {
  Experiment e = exp;
  e.schedule_kind = kind;
  const auto plan_a = assign_layers(e.model.layers, e.pipeline_depth, Component::kAttention);
  const auto plan_f = assign_layers(e.model.layers, e.pipeline_depth, Component::kFfn);
  ScheduleOutcome out;
  out.kind = kind;
  out.simulation = simulate(build_task_graph(e, alloc, plan_a, plan_f));
  if (disaggregated(kind)) {
    const auto a = memory_estimate(plan_a, e.model, e.workload, alloc);
    const auto f = memory_estimate(plan_f, e.model, e.workload, alloc);
    out.memory = a.total >= f.total ? a : f;
  } else {
    out.memory = baseline_memory_estimate(e);
  }
  out.oom = oom_check(out.memory, e.cluster.gpu_memory);
  out.a2a_share = a2a_share_of(out.simulation.trace);
  return out;
}

const ScheduleOutcome* RunReport::find(ScheduleKind kind) const {
  for (const auto& o : outcomes) {
    if (o.kind == kind) return &o;
  }
  return nullptr;
}

std::optional<double> RunReport::speedup(ScheduleKind kind,
                                         ScheduleKind baseline) const {
  const auto* x = find(kind);
  const auto* y = find(baseline);
  if (x == nullptr || y == nullptr) return std::nullopt;
  const double tx = x->simulation.result.iteration_time;
  if (tx <= 0.0) return std::nullopt;
  return y->simulation.result.iteration_time / tx;
}

RunReport build_report(const Experiment& exp, const Allocation& alloc,
                       std::span<const ScheduleKind> kinds) {
  RunReport report;
  report.experiment = exp;
  report.allocation = alloc;
  for (const auto kind : kinds) {
    report.outcomes.push_back(run_schedule(exp, kind, alloc));
    const auto& o = report.outcomes.back();
    if (o.oom) {
      report.warnings.push_back(fmt::format(
          "{}: estimated {} per GPU exceeds the {} capacity", to_string(kind),
          gigabytes(o.memory.total), gigabytes(exp.cluster.gpu_memory)));
    }
  }
  return report;
}

std::string format_ms(double seconds) { return fmt::format("{:.6g}", seconds * 1e3); }

std::string format_table(const RunReport& report) {
  std::string out = fmt::format("allocation: {}\n", to_string(report.allocation));
  out += fmt::format("{:<14}{:>16}{:>10}{:>18}{:>10}{:>16}\n", "schedule",
                     "iteration (ms)", "bubble", "exposed comm (ms)", "MFU",
                     "memory/GPU");
  for (const auto& o : report.outcomes) {
    const auto& r = o.simulation.result;
    out += fmt::format("{:<14}{:>16}{:>10.4f}{:>18}{:>10.4f}{:>16}\n", to_string(o.kind),
                       format_ms(r.iteration_time), r.bubble_fraction,
                       format_ms(r.exposed_comm), r.mfu,
                       gigabytes(o.memory.total) + (o.oom ? " OOM" : ""));
  }
  for (const auto& w : report.warnings) out += "warning: " + w + "\n";
  return out;
}

std::string format_comparison(const RunReport& report) {
  std::string out = format_table(report);
  const auto* af = report.find(ScheduleKind::kAfPipe);
  if (af == nullptr) return out;
  const double af_exposed = af->simulation.result.exposed_comm;
  for (const auto& o : report.outcomes) {
    if (o.kind == ScheduleKind::kAfPipe) continue;
    const double base = o.simulation.result.exposed_comm;
    const auto speedup = report.speedup(ScheduleKind::kAfPipe, o.kind);
    std::string reduction = "n/a";
    if (base > 0.0) reduction = fmt::format("{:.2f}%", (1.0 - af_exposed / base) * 100.0);
    out += fmt::format("afpipe vs {:<13} speedup {:.6g}x, exposed comm reduction {}\n",
                       to_string(o.kind), speedup.value_or(0.0), reduction);
  }
  return out;
}

std::string format_allocation(const AllocationReport& r) {
  std::string out;
  out += fmt::format("phase 1: T* = {} ms bottleneck, {} candidates in band\n",
                     format_ms(r.phase1_bottleneck), r.phase1_set_size);
  out += fmt::format("seed:    {} -> {} ms\n", to_string(r.seed_alloc), format_ms(r.seed_time));
  out += fmt::format("best:    {} -> {} ms\n", to_string(r.best), format_ms(r.t_star));
  out += fmt::format("refinement: {} trials, {} improvements\n", r.objective_trace.size(),
                     r.refine_improvements);
  return out;
}

json to_json(const Experiment& exp) {
  const auto& m = exp.model;
  const auto& w = exp.workload;
  const auto& c = exp.cluster;
  return {
      {"model",
       {{"layers", m.layers}, {"hidden", m.hidden}, {"experts", m.experts},
        {"topk", m.topk}, {"moe_hidden", m.moe_hidden}, {"gqa_group", m.gqa_group},
        {"bytes_per_element", m.bytes_per_element}, {"param_bytes", m.param_bytes},
        {"optimizer_bytes_per_param", m.optimizer_bytes_per_param}}},
      {"workload",
       {{"seq_len", w.seq_len}, {"micro_batch", w.micro_batch},
        {"num_microbatches", w.num_microbatches}}},
      {"cluster",
       {{"total_gpus", c.total_gpus}, {"gpus_per_node", c.gpus_per_node},
        {"total_nics", c.total_nics}, {"gpu_peak", c.gpu_peak}, {"ib_bw", c.ib_bw},
        {"nvlink_bw", c.nvlink_bw}, {"gpu_memory", c.gpu_memory}}},
      {"schedule",
       {{"kind", to_string(exp.schedule_kind)}, {"pipeline_depth", exp.pipeline_depth},
        {"virtual_stages", exp.virtual_stages}, {"ep_size", exp.ep_size},
        {"backward_multiplier", exp.backward_multiplier}}},
  };
}

json to_json(const Allocation& a) {
  return {{"attn_gpus", a.attn_gpus},         {"ffn_gpus", a.ffn_gpus},
          {"attn_nodes", a.attn_nodes},       {"ffn_nodes", a.ffn_nodes},
          {"attn_gpus_per_node", a.attn_gpus_per_node},
          {"ffn_gpus_per_node", a.ffn_gpus_per_node},
          {"attn_nics", a.attn_nics},         {"ffn_nics", a.ffn_nics}};
}

json to_json(const SimResult& r) {
  json busy = json::object();
  for (const auto& [name, seconds] : r.per_group_busy) busy[name] = seconds;
  return {{"iteration_time", r.iteration_time}, {"bubble_warmup", r.bubble_warmup},
          {"bubble_fraction", r.bubble_fraction}, {"exposed_comm", r.exposed_comm},
          {"mfu", r.mfu}, {"per_group_busy", busy}};
}

json to_json(const MemoryEstimate& m) {
  return {{"param_bytes", m.param_bytes}, {"optimizer_bytes", m.optimizer_bytes},
          {"activation_bytes", m.activation_bytes}, {"total", m.total}};
}

json to_json(const RunReport& report) {
  json results = json::array();
  for (const auto& o : report.outcomes) {
    json entry = to_json(o.simulation.result);
    entry["schedule"] = to_string(o.kind);
    entry["memory"] = to_json(o.memory);
    entry["oom"] = o.oom;
    entry["a2a_share"] = o.a2a_share;
    results.push_back(std::move(entry));
  }
  json speedups = json::object();
  for (const auto& x : report.outcomes) {
    for (const auto& y : report.outcomes) {
      if (x.kind == y.kind) continue;
      if (const auto s = report.speedup(x.kind, y.kind)) {
        speedups[fmt::format("{}_vs_{}", to_string(x.kind), to_string(y.kind))] = *s;
      }
    }
  }
  return {{"experiment", to_json(report.experiment)},
          {"allocation", to_json(report.allocation)},
          {"results", results},
          {"speedups", speedups},
          {"warnings", report.warnings}};
}

json to_json(const AllocationReport& r) {
  json trace = json::array();
  for (const auto& p : r.objective_trace) {
    trace.push_back({{"candidate", to_json(p.candidate)}, {"time", p.time},
                     {"accepted", p.accepted}});
  }
  return {{"best", to_json(r.best)},
          {"t_star", r.t_star},
          {"phase1_bottleneck", r.phase1_bottleneck},
          {"phase1_set_size", r.phase1_set_size},
          {"seed_alloc", to_json(r.seed_alloc)},
          {"seed_time", r.seed_time},
          {"refine_improvements", r.refine_improvements},
          {"objective_trace", trace}};
}

std::string objective_trace_csv(const AllocationReport& r) {
  std::string out = "trial,attn_gpus,attn_nics,time_s,accepted\n";
  for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
    const auto& p = r.objective_trace[i];
    out += fmt::format("{},{},{},{},{}\n", i, p.candidate.attn_gpus, p.candidate.attn_nics,
                       p.time, p.accepted ? 1 : 0);
  }
  return out;
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kSeqLen:
      return "seq_len";
    case SweepAxis::kTopk:
      return "topk";
    case SweepAxis::kEpSize:
      return "ep_size";
    case SweepAxis::kVirtualStages:
      return "virtual_stages";
    case SweepAxis::kAttnGpuShare:
      return "attn_gpu_share";
  }
  return "unknown";
}

SweepAxis parse_sweep_axis(std::string_view name) {
  for (auto axis : {SweepAxis::kSeqLen, SweepAxis::kTopk, SweepAxis::kEpSize,
                    SweepAxis::kVirtualStages, SweepAxis::kAttnGpuShare}) {
    if (to_string(axis) == name) return axis;
  }
  throw ConfigError(ConfigError::Kind::kInvalidValue, "axis",
                    fmt::format("unknown sweep axis '{}'", name));
}

Experiment sweep_point(const Experiment& base, SweepAxis axis, double value) {
  Experiment e = base;
  const std::string field{to_string(axis)};
  auto as_count = [&]() {
    if (!(value >= 1.0) || value != std::floor(value) || value > 9.0e15) {
      throw ConfigError(ConfigError::Kind::kInvalidValue, field,
                        fmt::format("{} is not a positive integer", value));
    }
    return static_cast<std::int64_t>(value);
  };
  switch (axis) {
    case SweepAxis::kSeqLen:
      e.workload.seq_len = as_count();
      break;
    case SweepAxis::kTopk:
      e.model.topk = as_count();
      break;
    case SweepAxis::kEpSize:
      e.ep_size = as_count();
      break;
    case SweepAxis::kVirtualStages: {
      const auto v = as_count();
      if (v > std::numeric_limits<std::int64_t>::max() / e.pipeline_depth) {
        throw ConfigError(ConfigError::Kind::kInvalidValue, field, "p * v overflows");
      }
      e.virtual_stages = v;
      e.model.layers = e.pipeline_depth * v;
      break;
    }
    case SweepAxis::kAttnGpuShare:
      if (!(value > 0.0 && value < 1.0)) {
        throw ConfigError(ConfigError::Kind::kInvalidValue, field,
                          fmt::format("{} is outside (0, 1)", value));
      }
      break;
  }
  if (const auto violations = validate(e); !violations.empty()) {
    throw ConfigError(ConfigError::Kind::kInvalidValue, violations.front().field,
                      fmt::format("{}={} violates {}", field, value, violations.front().rule));
  }
  return e;
}

std::vector<SweepRow> run_sweep(const Experiment& base, SweepAxis axis,
                                std::span<const double> values,
                                const SweepOptions& options) {
  // Validate every point before the first simulation.
  std::vector<Experiment> points;
  for (const double v : values) points.push_back(sweep_point(base, axis, v));

  const bool needs_split = std::any_of(options.kinds.begin(), options.kinds.end(), disaggregated);
  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Experiment& e = points[i];
    Allocation alloc;
    if (axis == SweepAxis::kAttnGpuShare) {
      alloc = share_allocation(e, values[i]);
    } else if (options.fixed_allocation) {
      alloc = *options.fixed_allocation;
    } else if (needs_split) {
      alloc = allocate(e, options.allocator).best;
    } else {
      alloc = share_allocation(e, 0.5);
    }
    const RunReport report = build_report(e, alloc, options.kinds);
    const double ca = attention_flops(e.model, e.workload);
    const double cf = static_cast<double>(ffn_flops(e.model, e.workload));
    for (const auto& o : report.outcomes) {
      SweepRow row;
      row.axis = axis;
      row.value = values[i];
      row.kind = o.kind;
      row.allocation = alloc;
      const auto& r = o.simulation.result;
      row.iteration_time = r.iteration_time;
      row.bubble_fraction = r.bubble_fraction;
      row.exposed_comm = r.exposed_comm;
      row.mfu = r.mfu;
      row.speedup_vs_megatron =
          report.speedup(o.kind, ScheduleKind::kMegatron1F1B).value_or(0.0);
      row.oom = o.oom;
      row.attn_compute_share = ca / (ca + cf);
      row.comm_bytes = static_cast<double>(m2n_comm_bytes(e.model, e.workload));
      row.a2a_share = o.a2a_share;
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out =
      "axis,value,schedule,iteration_time_ms,bubble_fraction,exposed_comm_ms,mfu,"
      "speedup_vs_megatron,oom_flag,attn_compute_share,comm_bytes,a2a_share,"
      "attn_gpus,attn_nics\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{:.10g},{},{},{:.6g},{},{:.6g},{:.6g},{},{:.6g},{:.0f},{:.6g},{},{}\n",
                       to_string(r.axis), r.value, to_string(r.kind),
                       format_ms(r.iteration_time), r.bubble_fraction,
                       format_ms(r.exposed_comm), r.mfu, r.speedup_vs_megatron,
                       r.oom ? 1 : 0, r.attn_compute_share, r.comm_bytes, r.a2a_share,
                       r.allocation.attn_gpus, r.allocation.attn_nics);
  }
  return out;
}

}  // namespace afpipe
