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

#include <compare>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

namespace afpipe {

// GPU/NIC split between the attention (A) and FFN (F) worker sets.
//   attn_gpus = attn_nodes * attn_gpus_per_node
//   ffn_gpus  = ffn_nodes * ffn_gpus_per_node
struct Allocation {
  std::int64_t attn_gpus = 0;          // M
  std::int64_t ffn_gpus = 0;           // N
  std::int64_t attn_nodes = 0;         // m
  std::int64_t ffn_nodes = 0;          // n
  std::int64_t attn_gpus_per_node = 0; // mu
  std::int64_t ffn_gpus_per_node = 0;  // nu
  std::int64_t attn_nics = 0;          // M_a
  std::int64_t ffn_nics = 0;           // M_f

  // Lexicographic in field order except that M_a sorts right after M,
  // which is the canonical enumeration order.
  friend std::strong_ordering operator<=>(const Allocation& a,
                                          const Allocation& b) {
    auto key = [](const Allocation& x) {
      return std::tuple(x.attn_gpus, x.attn_nics, x.attn_nodes,
                        x.attn_gpus_per_node, x.ffn_nodes, x.ffn_gpus_per_node);
    };
    return key(a) <=> key(b);
  }
  friend bool operator==(const Allocation&, const Allocation&) = default;
};

// Empty iff `alloc` conserves W GPUs and M_tot NICs and every count is
// within range.
std::vector<std::string> allocation_violations(const Allocation& alloc,
                                               std::int64_t total_gpus,
                                               std::int64_t total_nics,
                                               std::int64_t node_size_max);

// Largest per-node GPU count <= node_size_max that divides `gpus`.
std::int64_t canonical_gpus_per_node(std::int64_t gpus,
                                     std::int64_t node_size_max);

// Builds the allocation for a (M, M_a) pair with node shapes re-derived
// canonically. M and M_a must already be inside [1, W-1] and [1, M_tot-1].
Allocation make_allocation(std::int64_t attn_gpus, std::int64_t attn_nics,
                           std::int64_t total_gpus, std::int64_t total_nics,
                           std::int64_t node_size_max);

std::string to_string(const Allocation& alloc);

}  // namespace afpipe
