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

#include "afpipe/allocator.hpp"

#include <algorithm>
#include <map>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "afpipe/cost_model.hpp"
#include "afpipe/errors.hpp"
#include "afpipe/placement.hpp"
#include "afpipe/simulator.hpp"
#include "afpipe/task_graph.hpp"

namespace afpipe {
namespace {

// Simulated time depends on the split only through (M, M_a).
class CachedProfile {
 public:
  explicit CachedProfile(const Experiment& exp) : exp_(exp) {}

  double operator()(const Allocation& a) {
    const auto key = std::pair(a.attn_gpus, a.attn_nics);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double t = profile_iteration_time(exp_, a);
    cache_.emplace(key, t);
    return t;
  }

 private:
  const Experiment& exp_;
  std::map<std::pair<std::int64_t, std::int64_t>, double> cache_;
};

void require_splittable(const SearchSpace& s) {
  if (s.total_gpus < 2 || s.total_nics < 2 || s.node_size_max < 1 ||
      (s.equal_nics && s.total_nics % 2 != 0)) {
    throw NoFeasible(fmt::format(
        "no feasible allocation for W={} M_tot={} node_size_max={}{}",
        s.total_gpus, s.total_nics, s.node_size_max,
        s.equal_nics ? " with equal NIC split" : ""));
  }
}

}  // namespace

SearchSpace search_space(const Experiment& exp, bool equal_nics) {
  return {exp.cluster.total_gpus, exp.cluster.total_nics,
          exp.cluster.gpus_per_node, equal_nics};
}

std::vector<Allocation> enumerate_feasible(const SearchSpace& s) {
  require_splittable(s);
  std::vector<Allocation> out;
  for (std::int64_t M = 1; M < s.total_gpus; ++M) {
    const std::int64_t N = s.total_gpus - M;
    for (std::int64_t Ma = 1; Ma < s.total_nics; ++Ma) {
      if (s.equal_nics && 2 * Ma != s.total_nics) continue;
      for (std::int64_t mu = s.node_size_max; mu >= 1; --mu) {
        if (M % mu != 0) continue;
        for (std::int64_t nu = s.node_size_max; nu >= 1; --nu) {
          if (N % nu != 0) continue;
          out.push_back({M, N, M / mu, N / nu, mu, nu, Ma, s.total_nics - Ma});
        }
      }
    }
  }
  // Descending mu is ascending m; a final sort pins the documented order.
  std::sort(out.begin(), out.end());
  if (out.empty()) throw NoFeasible("feasible allocation set is empty");
  return out;
}

std::vector<Allocation> enumerate_feasible(std::int64_t total_gpus,
                                           std::int64_t total_nics,
                                           std::int64_t node_size_max) {
  return enumerate_feasible(SearchSpace{total_gpus, total_nics, node_size_max, false});
}

double bottleneck_time(const Allocation& alloc, const Experiment& exp) {
  const StageTimes t = stage_times(stage_inputs(exp), alloc, exp.cluster);
  return std::max(t.t_attn, t.t_ffn);
}

Phase1Result phase1_min_bottleneck(const std::vector<Allocation>& candidates,
                                   const Experiment& exp, double epsilon) {
  Phase1Result r;
  if (candidates.empty()) return r;
  const StageInputs in = stage_inputs(exp);
  std::vector<double> times;
  times.reserve(candidates.size());
  for (const auto& c : candidates) {
    const StageTimes t = stage_times(in, c, exp.cluster);
    times.push_back(std::max(t.t_attn, t.t_ffn));
  }
  r.t_star = *std::min_element(times.begin(), times.end());
  const double bound = r.t_star * (1.0 + std::max(0.0, epsilon));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (times[i] <= bound) r.set.push_back(candidates[i]);
  }
  return r;
}

double phase2_objective(const Allocation& a, const Experiment& exp) {
  const auto intensity = arithmetic_intensities(exp.model, exp.workload);
  const double peak = exp.cluster.gpu_peak;
  const double bw = exp.cluster.ib_bw;
  auto attained = [&](double i, std::int64_t nics, std::int64_t gpus) {
    const double per_gpu_bw = static_cast<double>(nics) * bw / static_cast<double>(gpus);
    return std::min(peak, i * per_gpu_bw) / peak;
  };
  return attained(intensity.attn, a.attn_nics, a.attn_gpus) +
         attained(intensity.ffn, a.ffn_nics, a.ffn_gpus);
}

Allocation phase2_tiebreak(const std::vector<Allocation>& set,
                           const Experiment& exp) {
  if (set.empty()) throw NoFeasible("Phase 2 received an empty set");
  Allocation best = set.front();
  double best_value = phase2_objective(best, exp);
  for (std::size_t i = 1; i < set.size(); ++i) {
    const double v = phase2_objective(set[i], exp);
    if (v > best_value || (v == best_value && set[i] < best)) {
      best = set[i];
      best_value = v;
    }
  }
  return best;
}

RefineResult phase3_refine(const Allocation& seed, const AllocatorParams& params,
                           const ProfileFn& profile, const SearchSpace& space) {
  RefineResult r;
  r.best = seed;
  r.time = profile(seed);
  if (params.trials <= 0) return r;
  std::mt19937_64 rng(params.seed);
  const std::int64_t radius = std::max<std::int64_t>(0, params.radius);
  std::uniform_int_distribution<std::int64_t> step(-radius, radius);
  for (std::int64_t k = 0; k < params.trials; ++k) {
    const std::int64_t dm = step(rng);
    const std::int64_t dma = step(rng);
    const std::int64_t M = std::clamp(r.best.attn_gpus + dm, std::int64_t{1},
                                      space.total_gpus - 1);
    const std::int64_t Ma =
        space.equal_nics ? space.total_nics / 2
                         : std::clamp(r.best.attn_nics + dma, std::int64_t{1},
                                      space.total_nics - 1);
    const Allocation cand = make_allocation(M, Ma, space.total_gpus,
                                            space.total_nics, space.node_size_max);
    const double t = profile(cand);
    const bool better = t < r.time;
    r.trace.push_back({cand, t, better});
    if (better) {
      spdlog::debug("refine trial {}: {} -> {:.6g} ms", k, to_string(cand), t * 1e3);
      r.best = cand;
      r.time = t;
      ++r.improvements;
    }
  }
  return r;
}

double profile_iteration_time(const Experiment& exp, const Allocation& alloc) {
  Experiment af = exp;
  af.schedule_kind = ScheduleKind::kAfPipe;
  const auto plan_a = assign_layers(af.model.layers, af.pipeline_depth, Component::kAttention);
  const auto plan_f = assign_layers(af.model.layers, af.pipeline_depth, Component::kFfn);
  return simulate(build_task_graph(af, alloc, plan_a, plan_f)).result.iteration_time;
}

Allocation roofline_seed(const Experiment& exp, const AllocatorParams& params) {
  const auto candidates = enumerate_feasible(search_space(exp, params.equal_nics));
  return phase2_tiebreak(phase1_min_bottleneck(candidates, exp, params.epsilon).set, exp);
}

AllocationReport allocate(const Experiment& exp, const AllocatorParams& params) {
  const SearchSpace space = search_space(exp, params.equal_nics);
  const auto candidates = enumerate_feasible(space);
  const auto phase1 = phase1_min_bottleneck(candidates, exp, params.epsilon);
  AllocationReport report;
  report.phase1_bottleneck = phase1.t_star;
  report.phase1_set_size = static_cast<std::int64_t>(phase1.set.size());
  report.seed_alloc = phase2_tiebreak(phase1.set, exp);

  CachedProfile cached(exp);
  const ProfileFn profile = [&](const Allocation& a) { return cached(a); };
  report.seed_time = profile(report.seed_alloc);
  auto refined = phase3_refine(report.seed_alloc, params, profile, space);
  report.best = refined.best;
  report.t_star = refined.time;
  report.refine_improvements = refined.improvements;
  report.objective_trace = std::move(refined.trace);
  spdlog::debug("allocate: |S|={} seed {} ({:.6g} ms) best {} ({:.6g} ms)",
               report.phase1_set_size, to_string(report.seed_alloc),
               report.seed_time * 1e3, to_string(report.best), report.t_star * 1e3);
  return report;
}

OracleResult brute_force_oracle(const Experiment& exp, std::int64_t cap,
                                bool equal_nics) {
  const auto candidates = enumerate_feasible(search_space(exp, equal_nics));
  if (static_cast<std::int64_t>(candidates.size()) > cap) {
    throw SearchSpaceTooLarge(fmt::format(
        "{} feasible allocations exceed the cap of {}", candidates.size(), cap));
  }
  CachedProfile profile(exp);
  OracleResult best{candidates.front(), profile(candidates.front())};
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double t = profile(candidates[i]);
    if (t < best.time) best = {candidates[i], t};
  }
  return best;
}

}  // namespace afpipe
