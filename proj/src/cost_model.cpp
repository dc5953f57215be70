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

#include "afpipe/cost_model.hpp"

#include <fmt/format.h>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace detail {

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) {
    throw OverflowError(fmt::format("{} * {} overflows int64", a, b));
  }
  return out;
}

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) {
    throw OverflowError(fmt::format("{} + {} overflows int64", a, b));
  }
  return out;
}

std::int64_t attention_flops_times_g(const ModelConfig& m, const Workload& w) {
  const std::int64_t g = m.gqa_group;
  const std::int64_t s = w.seq_len;
  const std::int64_t h = m.hidden;
  // s H^2 (2g + 2) + 4 s^2 H g
  const std::int64_t projections =
      checked_mul(checked_mul(checked_mul(s, h), h),
                  checked_add(checked_mul(2, g), 2));
  const std::int64_t scores =
      checked_mul(checked_mul(checked_mul(checked_mul(4, s), s), h), g);
  return checked_mul(w.micro_batch, checked_add(projections, scores));
}

}  // namespace detail

using detail::checked_mul;

std::int64_t ffn_flops(const ModelConfig& m, const Workload& w) {
  return checked_mul(
      checked_mul(checked_mul(checked_mul(checked_mul(4, w.micro_batch), m.topk),
                              w.seq_len),
                  m.hidden),
      m.moe_hidden);
}

std::int64_t m2n_comm_bytes(const ModelConfig& m, const Workload& w) {
  return checked_mul(
      checked_mul(checked_mul(checked_mul(m.bytes_per_element, w.micro_batch),
                              w.seq_len),
                  m.topk),
      m.hidden);
}

StageInputs stage_inputs(const Experiment& exp) {
  StageInputs in;
  in.attn_flops = attention_flops(exp.model, exp.workload);
  in.ffn_flops = static_cast<double>(ffn_flops(exp.model, exp.workload));
  in.comm_bytes = static_cast<double>(m2n_comm_bytes(exp.model, exp.workload));
  // The stage's GPUs share the micro-batch, so each holds 1/G of its tokens.
  const double stage_gpus = static_cast<double>(exp.cluster.total_gpus) /
                            static_cast<double>(exp.pipeline_depth);
  in.a2a_bytes_per_gpu =
      ep_a2a_internode_bytes_per_gpu(exp.model, exp.workload, exp.ep_size,
                                     exp.cluster.gpus_per_node) /
      stage_gpus;
  in.p2p_bytes = static_cast<double>(
      checked_mul(checked_mul(checked_mul(exp.model.bytes_per_element,
                                          exp.workload.micro_batch),
                              exp.workload.seq_len),
                  exp.model.hidden));
  return in;
}

StageTimes stage_times(const StageInputs& in, const Allocation& alloc,
                       const ClusterConfig& cluster,
                       std::int64_t pipeline_depth) {
  const double peak = cluster.gpu_peak;
  const double bw = cluster.ib_bw;
  const auto as_double = [](std::int64_t x) { return static_cast<double>(x); };
  StageTimes t;
  t.t_attn = std::max(in.attn_flops / (peak * as_double(alloc.attn_gpus)),
                      in.comm_bytes / (as_double(alloc.attn_nics) * bw));
  t.t_ffn = std::max(in.ffn_flops / (peak * as_double(alloc.ffn_gpus)),
                     in.comm_bytes / (as_double(alloc.ffn_nics) * bw));
  const double per_gpu_bw = as_double(cluster.total_nics) * bw /
                            as_double(cluster.total_gpus);
  t.t_a2a = in.a2a_bytes_per_gpu / per_gpu_bw;
  t.t_m2n = in.comm_bytes /
            (as_double(std::min(alloc.attn_nics, alloc.ffn_nics)) * bw);
  const double stage_bw =
      as_double(cluster.total_nics) / as_double(pipeline_depth) * bw;
  t.t_p2p = in.p2p_bytes / stage_bw;
  return t;
}

}  // namespace afpipe
