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

// Closed-form per-layer costs for one micro-batch, forward pass only.
//
//   attention FLOPs  C_a = b (s H^2 (2 + 2/g) + 4 s^2 H)
//   expert FLOPs     C_f = 4 b k s H D_e
//   M2N volume       V   = e b s k H
//
// The formulas are templates on the scalar type. `double` is what the
// simulator and allocator use; an exact rational type such as
// boost::multiprecision::cpp_rational makes identities like C_a / V == I_attn
// hold exactly.

#include <algorithm>
#include <cstdint>

#include "afpipe/allocation.hpp"
#include "afpipe/experiment.hpp"

namespace afpipe {

namespace detail {

// 64-bit integer arithmetic that throws OverflowError instead of wrapping.
std::int64_t checked_mul(std::int64_t a, std::int64_t b);
std::int64_t checked_add(std::int64_t a, std::int64_t b);

// g * C_a, which is always integral.
std::int64_t attention_flops_times_g(const ModelConfig& m, const Workload& w);

}  // namespace detail

template <typename Scalar = double>
Scalar attention_flops(const ModelConfig& m, const Workload& w) {
  return Scalar(detail::attention_flops_times_g(m, w)) / Scalar(m.gqa_group);
}

// 4 b k s H D_e. Throws OverflowError past the int64 range.
std::int64_t ffn_flops(const ModelConfig& m, const Workload& w);

// e b s k H: one direction of the attention/FFN exchange.
std::int64_t m2n_comm_bytes(const ModelConfig& m, const Workload& w);

// ((EP-1)/EP) e b s k H, the expected per-GPU all-to-all volume when the
// b*s tokens live on one GPU of an EP group.
template <typename Scalar = double>
Scalar ep_a2a_bytes_per_gpu(const ModelConfig& m, const Workload& w,
                            std::int64_t ep_size) {
  return Scalar(ep_size - 1) * Scalar(m2n_comm_bytes(m, w)) / Scalar(ep_size);
}

// The part of ep_a2a_bytes_per_gpu that leaves the node. Peers on the same
// node are reached over NVLink, which is not costed.
template <typename Scalar = double>
Scalar ep_a2a_internode_bytes_per_gpu(const ModelConfig& m, const Workload& w,
                                      std::int64_t ep_size,
                                      std::int64_t gpus_per_node) {
  const std::int64_t local = std::min(ep_size, gpus_per_node);
  return Scalar(ep_size - local) * Scalar(m2n_comm_bytes(m, w)) /
         Scalar(ep_size);
}

template <typename Scalar>
struct Intensities {
  Scalar attn;  // FLOPs per communicated byte
  Scalar ffn;
};

// I_attn = (H (2 + 2/g) + 4 s) / (e k), I_ffn = 4 D_e / e.
// With e = 2 these are (H(2+2/g)+4s)/(2k) and 2 D_e.
template <typename Scalar = double>
Intensities<Scalar> arithmetic_intensities(const ModelConfig& m,
                                           const Workload& w) {
  const std::int64_t g = m.gqa_group;
  const std::int64_t num = detail::checked_add(
      detail::checked_mul(m.hidden, detail::checked_add(detail::checked_mul(2, g), 2)),
      detail::checked_mul(detail::checked_mul(4, w.seq_len), g));
  const std::int64_t den =
      detail::checked_mul(detail::checked_mul(m.bytes_per_element, m.topk), g);
  return {Scalar(num) / Scalar(den),
          Scalar(detail::checked_mul(4, m.moe_hidden)) /
              Scalar(m.bytes_per_element)};
}

template <typename Scalar>
struct TurningPoints {
  Scalar system;     // P / B_IB
  Scalar attention;  // 2m/(m+n) * system
  Scalar ffn;        // 2n/(m+n) * system
};

template <typename Scalar = double>
TurningPoints<Scalar> turning_points(const ClusterConfig& cluster,
                                     std::int64_t m_nodes,
                                     std::int64_t n_nodes) {
  const Scalar system = Scalar(cluster.gpu_peak) / Scalar(cluster.ib_bw);
  const Scalar nodes = Scalar(m_nodes + n_nodes);
  return {system, Scalar(2 * m_nodes) / nodes * system,
          Scalar(2 * n_nodes) / nodes * system};
}

template <typename Scalar>
struct CostBreakdown {
  Scalar attn_flops;      // C_a
  Scalar ffn_flops;       // C_f
  Scalar comm_bytes;      // V
  Scalar i_attn;
  Scalar i_ffn;
  Scalar turning_point;   // I^
  Scalar eff_turn_a;      // I^A
  Scalar eff_turn_f;      // I^F
};

template <typename Scalar = double>
CostBreakdown<Scalar> cost_breakdown(const ModelConfig& m, const Workload& w,
                                     const ClusterConfig& cluster,
                                     std::int64_t m_nodes,
                                     std::int64_t n_nodes) {
  const auto intensity = arithmetic_intensities<Scalar>(m, w);
  const auto turn = turning_points<Scalar>(cluster, m_nodes, n_nodes);
  return {attention_flops<Scalar>(m, w),
          Scalar(ffn_flops(m, w)),
          Scalar(m2n_comm_bytes(m, w)),
          intensity.attn,
          intensity.ffn,
          turn.system,
          turn.attention,
          turn.ffn};
}

// Attainable FLOPs/s under a roof P and a bandwidth slope B.
template <typename Scalar = double>
Scalar roofline_attainable(Scalar intensity, Scalar peak, Scalar bandwidth) {
  return std::min(peak, intensity * bandwidth);
}

inline constexpr double kDefaultBackwardMultiplier = 2.0;

template <typename Scalar = double>
Scalar backward_scale(Scalar forward_flops,
                      Scalar multiplier = Scalar(kDefaultBackwardMultiplier)) {
  return multiplier * forward_flops;
}

// Per-layer work feeding stage_times. The baseline-only volumes default to
// zero for the disaggregated schedule.
struct StageInputs {
  double attn_flops = 0.0;
  double ffn_flops = 0.0;
  double comm_bytes = 0.0;
  double a2a_bytes_per_gpu = 0.0;
  double p2p_bytes = 0.0;
};

struct StageTimes {
  double t_attn = 0.0;  // max(C_a / (P M), V / (M_a B_IB))
  double t_ffn = 0.0;   // max(C_f / (P N), V / (M_f B_IB))
  double t_a2a = 0.0;   // a2a_bytes_per_gpu / per-GPU NIC bandwidth
  double t_m2n = 0.0;   // V / (min(M_a, M_f) B_IB)
  double t_p2p = 0.0;   // p2p_bytes / per-stage NIC bandwidth
};

StageInputs stage_inputs(const Experiment& exp);

StageTimes stage_times(const StageInputs& in, const Allocation& alloc,
                       const ClusterConfig& cluster,
                       std::int64_t pipeline_depth = 1);

}  // namespace afpipe
