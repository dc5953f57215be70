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

#include "afpipe/placement.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace {

double attention_params_per_layer(const ModelConfig& m) {
  const double h = static_cast<double>(m.hidden);
  return h * h * (2.0 + 2.0 / static_cast<double>(m.gqa_group)) + h * h;
}

double expert_params_per_layer(const ModelConfig& m) {
  return static_cast<double>(m.experts) * 2.0 * static_cast<double>(m.hidden) *
         static_cast<double>(m.moe_hidden);
}

double hidden_state_bytes(const ModelConfig& m, const Workload& w) {
  return static_cast<double>(m.bytes_per_element) *
         static_cast<double>(w.micro_batch) * static_cast<double>(w.seq_len) *
         static_cast<double>(m.hidden);
}

MemoryEstimate finish(const ModelConfig& m, double params, double activations) {
  MemoryEstimate est;
  est.param_bytes = params * static_cast<double>(m.param_bytes);
  est.optimizer_bytes = params * m.optimizer_bytes_per_param;
  est.activation_bytes = activations;
  est.total = est.param_bytes + est.optimizer_bytes + est.activation_bytes;
  return est;
}

}  // namespace

std::string_view to_string(Component c) {
  return c == Component::kAttention ? "A" : "F";
}

PlacementPlan assign_layers(std::int64_t layers, std::int64_t pipeline_depth,
                            Component component) {
  if (pipeline_depth < 1 || pipeline_depth > layers) {
    throw PlacementError(fmt::format(
        "pipeline depth {} must lie in [1, L={}]", pipeline_depth, layers));
  }
  PlacementPlan plan;
  plan.component = component;
  plan.pipeline_depth = pipeline_depth;
  plan.virtual_stages = (layers + pipeline_depth - 1) / pipeline_depth;
  plan.groups.resize(static_cast<std::size_t>(pipeline_depth));
  for (std::int64_t g = 0; g < pipeline_depth; ++g) {
    auto& group = plan.groups[static_cast<std::size_t>(g)];
    group.id = g;
    for (std::int64_t layer = g; layer < layers; layer += pipeline_depth) {
      group.layers.push_back(layer);
    }
  }
  if (component == Component::kFfn) {
    plan.output_embedding_group = (layers - 1) % pipeline_depth;
  }
  return plan;
}

std::vector<std::string> validate_partition(const PlacementPlan& plan,
                                            std::int64_t layers) {
  std::vector<std::string> out;
  std::vector<int> seen(static_cast<std::size_t>(std::max<std::int64_t>(layers, 0)), 0);
  std::size_t smallest = SIZE_MAX;
  std::size_t largest = 0;
  for (const auto& group : plan.groups) {
    smallest = std::min(smallest, group.layers.size());
    largest = std::max(largest, group.layers.size());
    for (std::int64_t layer : group.layers) {
      if (layer < 0 || layer >= layers) {
        out.push_back(fmt::format("layer {} out of range", layer));
        continue;
      }
      if (++seen[static_cast<std::size_t>(layer)] == 2) {
        out.push_back(fmt::format("duplicate layer {}", layer));
      }
    }
  }
  for (std::int64_t layer = 0; layer < layers; ++layer) {
    if (seen[static_cast<std::size_t>(layer)] == 0) {
      out.push_back(fmt::format("uncovered layer {}", layer));
    }
  }
  if (!plan.groups.empty() && largest - smallest > 1) {
    out.push_back(fmt::format("group sizes differ by {} (> 1)", largest - smallest));
  }
  return out;
}

MemoryEstimate memory_estimate(const PlacementPlan& plan, const ModelConfig& m,
                               const Workload& w, const Allocation& alloc) {
  const double p = static_cast<double>(plan.pipeline_depth);
  const double held = static_cast<double>(plan.virtual_stages);
  const bool attention = plan.component == Component::kAttention;
  const double group_gpus =
      static_cast<double>(attention ? alloc.attn_gpus : alloc.ffn_gpus) / p;

  // Attention weights are replicated (data parallel); experts are sharded
  // across the group's GPUs.
  const double params =
      attention ? held * attention_params_per_layer(m)
                : held * expert_params_per_layer(m) / group_gpus;

  // 1F1B credit of group 0: a micro-batch makes 2L stage visits, the first
  // on A_0 and the second on F_0.
  std::int64_t layers = 0;
  for (const auto& g : plan.groups) layers += static_cast<std::int64_t>(g.layers.size());
  const std::int64_t credit = 2 * layers - (attention ? 0 : 1);
  const double in_flight =
      static_cast<double>(std::min(w.num_microbatches, credit));
  const double activations =
      held * in_flight * hidden_state_bytes(m, w) / group_gpus;
  return finish(m, params, activations);
}

MemoryEstimate baseline_memory_estimate(const Experiment& exp) {
  const auto& m = exp.model;
  const double p = static_cast<double>(exp.pipeline_depth);
  const double stage_gpus = static_cast<double>(exp.cluster.total_gpus) / p;
  const double held =
      static_cast<double>((m.layers + exp.pipeline_depth - 1) / exp.pipeline_depth);
  const double ep = static_cast<double>(exp.ep_size);
  const double params = held * (attention_params_per_layer(m) +
                                expert_params_per_layer(m) / ep);
  // Stage 0 sees all p * v chunk visits of a micro-batch as its credit.
  const std::int64_t visits =
      exp.pipeline_depth == 1 ? 1 : exp.pipeline_depth * exp.virtual_stages;
  const double in_flight =
      static_cast<double>(std::min(exp.workload.num_microbatches, visits));
  const double activations =
      held * in_flight * hidden_state_bytes(m, exp.workload) / stage_gpus;
  return finish(m, params, activations);
}

bool oom_check(const MemoryEstimate& est, double capacity) {
  return est.total > capacity;
}

}  // namespace afpipe
