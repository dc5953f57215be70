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
#include <functional>
#include <vector>

#include "afpipe/allocation.hpp"
#include "afpipe/experiment.hpp"

namespace afpipe {

struct AllocatorParams {
  std::int64_t radius = 4;
  std::int64_t trials = 512;
  // Relative band: Phase 1 keeps candidates within (1 + epsilon) T*.
  double epsilon = 1e-3;
  std::uint64_t seed = 0;
  // Forces M_a == M_f.
  bool equal_nics = false;
};

struct SearchSpace {
  std::int64_t total_gpus = 2;
  std::int64_t total_nics = 2;
  std::int64_t node_size_max = 8;
  bool equal_nics = false;
};

SearchSpace search_space(const Experiment& exp, bool equal_nics = false);

struct ObjectivePoint {
  Allocation candidate;
  double time = 0.0;
  bool accepted = false;
};

struct AllocationReport {
  Allocation best;
  double t_star = 0.0;  // profiled iteration time of `best`
  double phase1_bottleneck = 0.0;
  std::int64_t phase1_set_size = 0;
  Allocation seed_alloc;
  double seed_time = 0.0;
  std::int64_t refine_improvements = 0;
  std::vector<ObjectivePoint> objective_trace;
};

// All allocations of the space, ascending in (M, M_a, m, mu, n, nu).
// Throws NoFeasible when it is empty.
std::vector<Allocation> enumerate_feasible(const SearchSpace& space);
std::vector<Allocation> enumerate_feasible(std::int64_t total_gpus,
                                           std::int64_t total_nics,
                                           std::int64_t node_size_max);

struct Phase1Result {
  double t_star = 0.0;
  std::vector<Allocation> set;  // canonical order
};

// Bottleneck max(T_a, T_f) of one candidate.
double bottleneck_time(const Allocation& alloc, const Experiment& exp);

Phase1Result phase1_min_bottleneck(const std::vector<Allocation>& candidates,
                                   const Experiment& exp, double epsilon);

// Sum over both components of min(1, I_c * NIC bandwidth_c / (P * GPUs_c)):
// each side's attainable roofline fraction under its own NIC share.
double phase2_objective(const Allocation& alloc, const Experiment& exp);

// Argmax of phase2_objective; the canonically first one among equals.
Allocation phase2_tiebreak(const std::vector<Allocation>& set,
                           const Experiment& exp);

using ProfileFn = std::function<double(const Allocation&)>;

struct RefineResult {
  Allocation best;
  double time = 0.0;
  std::int64_t improvements = 0;
  std::vector<ObjectivePoint> trace;  // one entry per trial
};

// K trials of (M, M_a) += U{-r..r}^2 from the current best, clipped into the
// space; accepts strictly better profiles only.
RefineResult phase3_refine(const Allocation& seed, const AllocatorParams& params,
                           const ProfileFn& profile, const SearchSpace& space);

// Simulated AF-Pipe iteration time of `exp` under `alloc`.
double profile_iteration_time(const Experiment& exp, const Allocation& alloc);

// Phases 1 and 2 only.
Allocation roofline_seed(const Experiment& exp, const AllocatorParams& params);

AllocationReport allocate(const Experiment& exp, const AllocatorParams& params);

struct OracleResult {
  Allocation best;
  double time = 0.0;
};

inline constexpr std::int64_t kDefaultOracleCap = 100000;

// Profiles every feasible allocation. Throws SearchSpaceTooLarge when there
// are more than `cap`.
OracleResult brute_force_oracle(const Experiment& exp,
                                std::int64_t cap = kDefaultOracleCap,
                                bool equal_nics = false);

}  // namespace afpipe
