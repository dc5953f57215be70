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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "afpipe/allocation.hpp"
#include "afpipe/allocator.hpp"
#include "afpipe/experiment.hpp"
#include "afpipe/placement.hpp"
#include "afpipe/simulator.hpp"

namespace afpipe {

struct ScheduleOutcome {
  ScheduleKind kind = ScheduleKind::kAfPipe;
  Simulation simulation;
  // Most loaded GPU of the layout.
  MemoryEstimate memory;
  bool oom = false;
  // A2A time on the compute engines over their total busy time.
  double a2a_share = 0.0;
};

// Simulates `exp` under `kind`; the allocation only matters for the
// disaggregated kinds.
ScheduleOutcome run_schedule(const Experiment& exp, ScheduleKind kind,
                             const Allocation& alloc);

struct RunReport {
  Experiment experiment;
  Allocation allocation;
  std::vector<ScheduleOutcome> outcomes;
  std::vector<std::string> warnings;

  const ScheduleOutcome* find(ScheduleKind kind) const;
  // iteration_time(baseline) / iteration_time(kind); nullopt when either is
  // missing or the denominator is zero.
  std::optional<double> speedup(ScheduleKind kind, ScheduleKind baseline) const;
};

RunReport build_report(const Experiment& exp, const Allocation& alloc,
                       std::span<const ScheduleKind> kinds);

// Times in milliseconds with six significant digits.
std::string format_ms(double seconds);

std::string format_table(const RunReport& report);
// Iteration time, exposed communication, and AF-Pipe's exposed-communication
// reduction against every other kind present.
std::string format_comparison(const RunReport& report);
std::string format_allocation(const AllocationReport& report);

nlohmann::json to_json(const Experiment& exp);
nlohmann::json to_json(const Allocation& alloc);
nlohmann::json to_json(const SimResult& result);
nlohmann::json to_json(const MemoryEstimate& memory);
nlohmann::json to_json(const RunReport& report);
nlohmann::json to_json(const AllocationReport& report);

// trial, attn_gpus, attn_nics, time_s, accepted
std::string objective_trace_csv(const AllocationReport& report);

enum class SweepAxis { kSeqLen, kTopk, kEpSize, kVirtualStages, kAttnGpuShare };

std::string_view to_string(SweepAxis axis);
// Throws ConfigError for an unknown name.
SweepAxis parse_sweep_axis(std::string_view name);

struct SweepRow {
  SweepAxis axis = SweepAxis::kSeqLen;
  double value = 0.0;
  ScheduleKind kind = ScheduleKind::kAfPipe;
  Allocation allocation;
  double iteration_time = 0.0;
  double bubble_fraction = 0.0;
  double exposed_comm = 0.0;
  double mfu = 0.0;
  double speedup_vs_megatron = 0.0;  // 0 when Megatron is not swept
  bool oom = false;
  double attn_compute_share = 0.0;   // C_a / (C_a + C_f)
  double comm_bytes = 0.0;           // token payload per layer and micro-batch
  double a2a_share = 0.0;
};

// The experiment at one sweep point. virtual_stages keeps p and sets
// L = p * v; attn_gpu_share only affects the allocation. Throws ConfigError
// when the point is invalid.
Experiment sweep_point(const Experiment& base, SweepAxis axis, double value);

struct SweepOptions {
  std::vector<ScheduleKind> kinds{std::begin(kAllScheduleKinds),
                                  std::end(kAllScheduleKinds)};
  AllocatorParams allocator;
  // Used at every point instead of re-running the allocator. Ignored by the
  // attn_gpu_share axis.
  std::optional<Allocation> fixed_allocation;
};

// Rows in value order, kinds in `options.kinds` order per value.
std::vector<SweepRow> run_sweep(const Experiment& base, SweepAxis axis,
                                std::span<const double> values,
                                const SweepOptions& options = {});

std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace afpipe
