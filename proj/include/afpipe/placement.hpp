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
#include <optional>
#include <string>
#include <vector>

#include "afpipe/allocation.hpp"
#include "afpipe/experiment.hpp"

namespace afpipe {

enum class Component { kAttention, kFfn };

std::string_view to_string(Component c);

struct LayerGroup {
  std::int64_t id = 0;
  std::vector<std::int64_t> layers;

  friend bool operator==(const LayerGroup&, const LayerGroup&) = default;
};

struct PlacementPlan {
  Component component = Component::kAttention;
  std::vector<LayerGroup> groups;
  std::int64_t pipeline_depth = 1;
  // Layers held by the largest group, ceil(L / p).
  std::int64_t virtual_stages = 1;
  // F plans only: the group hosting the last layer, which also holds the
  // output embedding. Not costed.
  std::optional<std::int64_t> output_embedding_group;

  friend bool operator==(const PlacementPlan&, const PlacementPlan&) = default;
};

// Group g receives layers {g, g + p, g + 2p, ...} below L.
// Throws PlacementError unless 1 <= p <= L.
PlacementPlan assign_layers(std::int64_t layers, std::int64_t pipeline_depth,
                            Component component);

// Empty iff the groups are disjoint, cover [0, L), and differ in size by at
// most one.
std::vector<std::string> validate_partition(const PlacementPlan& plan,
                                            std::int64_t layers);

struct MemoryEstimate {
  double param_bytes = 0.0;
  double optimizer_bytes = 0.0;
  double activation_bytes = 0.0;
  double total = 0.0;
};

// Per-GPU footprint of the most loaded group in `plan` (group 0 holds the
// most layers and the most in-flight micro-batches).
MemoryEstimate memory_estimate(const PlacementPlan& plan, const ModelConfig& m,
                               const Workload& w, const Allocation& alloc);

// Per-GPU footprint of the first stage of the Megatron-style baselines.
MemoryEstimate baseline_memory_estimate(const Experiment& exp);

// Fits when total <= capacity.
bool oom_check(const MemoryEstimate& est, double capacity);

}  // namespace afpipe
