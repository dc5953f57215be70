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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace afpipe {

// Transformer and MoE shape. Field comments give the usual symbol.
struct ModelConfig {
  std::int64_t layers = 0;             // L
  std::int64_t hidden = 0;             // H
  std::int64_t experts = 0;            // E
  std::int64_t topk = 0;               // k
  std::int64_t moe_hidden = 0;         // D_e
  std::int64_t gqa_group = 1;          // g, 1 means plain multi-head attention
  std::int64_t bytes_per_element = 2;  // e, activations on the wire
  std::int64_t param_bytes = 2;        // storage per parameter
  double optimizer_bytes_per_param = 8.0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Workload {
  std::int64_t seq_len = 0;      // s
  std::int64_t micro_batch = 0;  // b, sequences per micro-batch
  std::int64_t num_microbatches = 1;

  friend bool operator==(const Workload&, const Workload&) = default;
};

struct ClusterConfig {
  std::int64_t total_gpus = 0;  // W
  std::int64_t gpus_per_node = 8;
  std::int64_t total_nics = 0;  // M_tot
  double gpu_peak = 0.0;        // P, FLOPs/s
  double ib_bw = 0.0;           // B_IB, bytes/s per NIC
  double nvlink_bw = 0.0;       // B_NV, recorded only
  double gpu_memory = 80e9;     // bytes per GPU

  friend bool operator==(const ClusterConfig&, const ClusterConfig&) = default;
};

enum class ScheduleKind { kAfPipe, kMegatron1F1B, kChunkedOverlap, kNaiveSequential };

inline constexpr ScheduleKind kAllScheduleKinds[] = {
    ScheduleKind::kAfPipe, ScheduleKind::kMegatron1F1B,
    ScheduleKind::kChunkedOverlap, ScheduleKind::kNaiveSequential};

// Canonical lowercase names: afpipe, megatron1f1b, chunked, naive.
std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

struct Experiment {
  ModelConfig model;
  Workload workload;
  ClusterConfig cluster;
  ScheduleKind schedule_kind = ScheduleKind::kAfPipe;
  std::int64_t pipeline_depth = 1;  // p
  std::int64_t virtual_stages = 1;  // v
  std::int64_t ep_size = 1;         // EP, baselines only
  double backward_multiplier = 2.0;

  friend bool operator==(const Experiment&, const Experiment&) = default;
};

struct Violation {
  std::string field;
  std::string rule;

  friend bool operator==(const Violation&, const Violation&) = default;
};

// Empty iff every field invariant holds.
std::vector<Violation> validate(const Experiment& exp);

// Parses the sectioned key/value document described in README.md.
// Throws ConfigError (missing field, invalid value, schema violation).
Experiment parse_experiment(std::string_view text);
Experiment load_experiment(const std::filesystem::path& path);

// Writes every field, so parse_experiment(serialize_experiment(x)) == x.
std::string serialize_experiment(const Experiment& exp);

}  // namespace afpipe
