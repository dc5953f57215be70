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

#include "afpipe/allocation.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "afpipe/errors.hpp"

namespace afpipe {

std::vector<std::string> allocation_violations(const Allocation& a,
                                               std::int64_t total_gpus,
                                               std::int64_t total_nics,
                                               std::int64_t node_size_max) {
  std::vector<std::string> out;
  auto require = [&out](bool ok, const char* rule) {
    if (!ok) out.emplace_back(rule);
  };
  require(a.attn_gpus + a.ffn_gpus == total_gpus, "M + N = W");
  require(a.attn_nics + a.ffn_nics == total_nics, "M_a + M_f = M_tot");
  require(a.attn_gpus == a.attn_nodes * a.attn_gpus_per_node, "M = m * mu");
  require(a.ffn_gpus == a.ffn_nodes * a.ffn_gpus_per_node, "N = n * nu");
  require(a.attn_nodes >= 1 && a.ffn_nodes >= 1, "m, n >= 1");
  require(a.attn_nics >= 1 && a.ffn_nics >= 1, "M_a, M_f >= 1");
  require(a.attn_gpus_per_node >= 1 && a.attn_gpus_per_node <= node_size_max,
          "mu in [1, node_size_max]");
  require(a.ffn_gpus_per_node >= 1 && a.ffn_gpus_per_node <= node_size_max,
          "nu in [1, node_size_max]");
  return out;
}

std::int64_t canonical_gpus_per_node(std::int64_t gpus,
                                     std::int64_t node_size_max) {
  for (std::int64_t mu = std::min(gpus, node_size_max); mu > 1; --mu) {
    if (gpus % mu == 0) return mu;
  }
  return 1;
}

Allocation make_allocation(std::int64_t attn_gpus, std::int64_t attn_nics,
                           std::int64_t total_gpus, std::int64_t total_nics,
                           std::int64_t node_size_max) {
  if (attn_gpus < 1 || attn_gpus >= total_gpus || attn_nics < 1 ||
      attn_nics >= total_nics) {
    throw NoFeasible(fmt::format(
        "split M={} M_a={} is outside W={} M_tot={}", attn_gpus, attn_nics,
        total_gpus, total_nics));
  }
  Allocation a;
  a.attn_gpus = attn_gpus;
  a.ffn_gpus = total_gpus - attn_gpus;
  a.attn_gpus_per_node = canonical_gpus_per_node(a.attn_gpus, node_size_max);
  a.ffn_gpus_per_node = canonical_gpus_per_node(a.ffn_gpus, node_size_max);
  a.attn_nodes = a.attn_gpus / a.attn_gpus_per_node;
  a.ffn_nodes = a.ffn_gpus / a.ffn_gpus_per_node;
  a.attn_nics = attn_nics;
  a.ffn_nics = total_nics - attn_nics;
  return a;
}

std::string to_string(const Allocation& a) {
  return fmt::format("M={} ({}x{}) N={} ({}x{}) M_a={} M_f={}", a.attn_gpus,
                     a.attn_nodes, a.attn_gpus_per_node, a.ffn_gpus, a.ffn_nodes,
                     a.ffn_gpus_per_node, a.attn_nics, a.ffn_nics);
}

}  // namespace afpipe
