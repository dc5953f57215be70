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

#include <gtest/gtest.h>

#include <random>

#include "afpipe/allocation.hpp"
#include "afpipe/errors.hpp"
#include "afpipe/placement.hpp"

namespace afpipe {
namespace {

std::vector<std::int64_t> layers_of(const PlacementPlan& plan, std::size_t g) {
  return plan.groups.at(g).layers;
}

TEST(AssignLayers, InterleavedExample) {
  const auto plan = assign_layers(8, 2, Component::kAttention);
  ASSERT_EQ(plan.groups.size(), 2u);
  EXPECT_EQ(layers_of(plan, 0), (std::vector<std::int64_t>{0, 2, 4, 6}));
  EXPECT_EQ(layers_of(plan, 1), (std::vector<std::int64_t>{1, 3, 5, 7}));
  EXPECT_EQ(plan.virtual_stages, 4);
}

TEST(AssignLayers, SingleGroup) {
  const auto plan = assign_layers(5, 1, Component::kFfn);
  ASSERT_EQ(plan.groups.size(), 1u);
  EXPECT_EQ(layers_of(plan, 0), (std::vector<std::int64_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(plan.output_embedding_group, 0);
}

TEST(AssignLayers, UnevenSizes) {
  const auto plan = assign_layers(7, 2, Component::kAttention);
  EXPECT_EQ(layers_of(plan, 0).size(), 4u);
  EXPECT_EQ(layers_of(plan, 1).size(), 3u);
  EXPECT_FALSE(plan.output_embedding_group.has_value());
  EXPECT_EQ(assign_layers(7, 2, Component::kFfn).output_embedding_group, 0);
}

TEST(AssignLayers, RejectsBadDepth) {
  EXPECT_THROW(assign_layers(4, 0, Component::kAttention), PlacementError);
  EXPECT_THROW(assign_layers(4, 5, Component::kAttention), PlacementError);
}

TEST(ValidatePartition, Violations) {
  auto plan = assign_layers(8, 2, Component::kAttention);
  EXPECT_TRUE(validate_partition(plan, 8).empty());
  plan.groups[1].layers.push_back(2);
  plan.groups[0].layers.erase(plan.groups[0].layers.begin());
  const auto v = validate_partition(plan, 8);
  EXPECT_NE(std::find(v.begin(), v.end(), "duplicate layer 2"), v.end());
  EXPECT_NE(std::find(v.begin(), v.end(), "uncovered layer 0"), v.end());
}

// Disjoint cover, balance, and the residue closed form over every L <= 256.
TEST(PlacementProperty, CoverAndMembership) {
  for (std::int64_t L = 1; L <= 256; ++L) {
    for (std::int64_t p = 1; p <= L; ++p) {
      const auto plan = assign_layers(L, p, Component::kAttention);
      ASSERT_TRUE(validate_partition(plan, L).empty()) << L << " " << p;
      ASSERT_EQ(static_cast<std::int64_t>(plan.groups.size()), p);
      for (std::int64_t g = 0; g < p; ++g) {
        const auto& layers = plan.groups[static_cast<std::size_t>(g)].layers;
        std::int64_t expect = g;
        for (auto l : layers) {
          ASSERT_EQ(l, expect);
          expect += p;
        }
        ASSERT_GE(expect, L);
      }
    }
  }
}

ModelConfig deepseek() {
  ModelConfig m;
  m.layers = 28;
  m.hidden = 2048;
  m.experts = 64;
  m.topk = 4;
  m.moe_hidden = 1408;
  return m;
}

Workload work() {
  Workload w;
  w.seq_len = 8192;
  w.micro_batch = 1;
  w.num_microbatches = 8;
  return w;
}

TEST(MemoryEstimate, ParamsLinearInHeldLayers) {
  const Allocation a = make_allocation(16, 16, 32, 32, 8);
  for (auto c : {Component::kAttention, Component::kFfn}) {
    const auto v14 = memory_estimate(assign_layers(28, 2, c), deepseek(), work(), a);
    const auto v16 = memory_estimate(assign_layers(32, 2, c), deepseek(), work(), a);
    const auto v32 = memory_estimate(assign_layers(64, 2, c), deepseek(), work(), a);
    EXPECT_DOUBLE_EQ((v16.param_bytes + v16.optimizer_bytes) /
                         (v14.param_bytes + v14.optimizer_bytes),
                     16.0 / 14.0);
    EXPECT_DOUBLE_EQ(v32.param_bytes, 2 * v16.param_bytes);
  }
}

TEST(MemoryEstimate, ExpertShardingHalves) {
  const auto plan = assign_layers(28, 2, Component::kFfn);
  const auto small = memory_estimate(plan, deepseek(), work(), make_allocation(16, 16, 32, 32, 8));
  const auto large = memory_estimate(plan, deepseek(), work(), make_allocation(16, 16, 48, 32, 8));
  EXPECT_DOUBLE_EQ(large.param_bytes, small.param_bytes / 2);
}

TEST(MemoryEstimate, MonotoneInShape) {
  const Allocation a = make_allocation(8, 8, 16, 16, 8);
  for (auto c : {Component::kAttention, Component::kFfn}) {
    double prev = 0;
    for (std::int64_t L = 2; L <= 64; L += 2) {
      const double t = memory_estimate(assign_layers(L, 2, c), deepseek(), work(), a).total;
      EXPECT_GE(t, prev);
      prev = t;
    }
    const double base = memory_estimate(assign_layers(28, 2, c), deepseek(), work(), a).total;
    for (auto bump : {&ModelConfig::hidden, &ModelConfig::moe_hidden, &ModelConfig::experts}) {
      ModelConfig m = deepseek();
      m.*bump *= 2;
      EXPECT_GE(memory_estimate(assign_layers(28, 2, c), m, work(), a).total, base);
    }
  }
}

TEST(OomCheck, InclusiveBoundary) {
  MemoryEstimate e;
  EXPECT_FALSE(oom_check(e, 80e9));
  e.total = 80e9;
  EXPECT_FALSE(oom_check(e, 80e9));
  e.total = 80e9 + 1;
  EXPECT_TRUE(oom_check(e, 80e9));
}

TEST(Allocation, Canonical) {
  EXPECT_EQ(canonical_gpus_per_node(12, 8), 6);
  EXPECT_EQ(canonical_gpus_per_node(7, 8), 7);
  EXPECT_EQ(canonical_gpus_per_node(11, 8), 1);
  const auto a = make_allocation(12, 5, 20, 16, 8);
  EXPECT_EQ(a.attn_nodes * a.attn_gpus_per_node, 12);
  EXPECT_EQ(a.ffn_nodes * a.ffn_gpus_per_node, 8);
  EXPECT_EQ(a.ffn_nics, 11);
  EXPECT_TRUE(allocation_violations(a, 20, 16, 8).empty());
  Allocation bad = a;
  bad.ffn_nics = 12;
  EXPECT_FALSE(allocation_violations(bad, 20, 16, 8).empty());
}

}  // namespace
}  // namespace afpipe
