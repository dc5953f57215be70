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

#include <cstring>
#include <limits>
#include <random>

#include "afpipe/cost_model.hpp"
#include "afpipe/errors.hpp"
#include "test_support.hpp"

namespace afpipe {
namespace {

using testing::Rational;

ModelConfig model(std::int64_t H, std::int64_t k, std::int64_t De, std::int64_t g = 1) {
  ModelConfig m;
  m.layers = 1;
  m.hidden = H;
  m.experts = 64;
  m.topk = k;
  m.moe_hidden = De;
  m.gqa_group = g;
  return m;
}

Workload workload(std::int64_t s, std::int64_t b = 1) {
  Workload w;
  w.seq_len = s;
  w.micro_batch = b;
  return w;
}

TEST(AttentionFlops, ClosedFormValue) {
  EXPECT_DOUBLE_EQ(attention_flops(model(1024, 2, 512, 8), workload(1024)), 6710886400.0);
  EXPECT_EQ(attention_flops<Rational>(model(1024, 2, 512, 8), workload(1024)),
            testing::oracle_attention_flops(1, 1024, 1024, 8));
}

TEST(AttentionFlops, ZeroSequenceAndLinearInBatch) {
  EXPECT_EQ(attention_flops(model(1024, 2, 512, 8), workload(0)), 0.0);
  const auto m = model(512, 2, 512, 4);
  EXPECT_EQ(attention_flops(m, workload(300, 2)), 2 * attention_flops(m, workload(300, 1)));
}

TEST(FfnFlops, Values) {
  EXPECT_EQ(ffn_flops(model(1024, 2, 512), workload(1024)), 4294967296);
  EXPECT_EQ(ffn_flops(model(1024, 0, 512), workload(1024)), 0);
  EXPECT_EQ(ffn_flops(model(1, 1, 1), workload(1)), 4);
}

TEST(FfnFlops, Overflow) {
  const auto big = std::int64_t{1} << 40;
  EXPECT_THROW(ffn_flops(model(big, 4, big), workload(big)), OverflowError);
}

TEST(CommBytes, Values) {
  auto m = model(1024, 2, 512);
  EXPECT_EQ(m2n_comm_bytes(m, workload(1024)), 4194304);
  EXPECT_EQ(m2n_comm_bytes(model(1024, 0, 512), workload(1024)), 0);
  const auto e2 = m2n_comm_bytes(m, workload(1024));
  m.bytes_per_element = 4;
  EXPECT_EQ(m2n_comm_bytes(m, workload(1024)), 2 * e2);
}

TEST(EpAllToAll, Values) {
  const auto m = model(1024, 2, 512);
  EXPECT_EQ(ep_a2a_bytes_per_gpu(m, workload(1024), 1), 0.0);
  EXPECT_EQ(ep_a2a_bytes_per_gpu(m, workload(1024), 2), 2097152.0);
  const double full = static_cast<double>(m2n_comm_bytes(m, workload(1024)));
  EXPECT_NEAR(ep_a2a_bytes_per_gpu(m, workload(1024), 1 << 20) / full, 1.0, 1e-5);
}

TEST(EpAllToAll, MonotoneAndBounded) {
  const auto m = model(2048, 4, 1408);
  const double full = static_cast<double>(m2n_comm_bytes(m, workload(4096)));
  double prev = -1.0;
  for (std::int64_t ep = 1; ep <= 256; ++ep) {
    const double v = ep_a2a_bytes_per_gpu(m, workload(4096), ep);
    EXPECT_GE(v, prev);
    EXPECT_LE(v, full);
    EXPECT_LE(ep_a2a_internode_bytes_per_gpu(m, workload(4096), ep, 8), v);
    prev = v;
  }
  EXPECT_EQ(ep_a2a_internode_bytes_per_gpu(m, workload(4096), 8, 8), 0.0);
}

TEST(Intensities, Values) {
  EXPECT_DOUBLE_EQ(arithmetic_intensities(model(1024, 2, 512, 8), workload(1024)).attn, 1600.0);
  EXPECT_DOUBLE_EQ(arithmetic_intensities(model(2048, 4, 1408), workload(8192)).ffn, 2816.0);
}

TEST(Intensities, MonotoneInSequence) {
  const auto m = model(2048, 4, 1408);
  double prev = 0.0;
  for (std::int64_t s = 256; s <= 65536; s *= 2) {
    const auto i = arithmetic_intensities(m, workload(s));
    EXPECT_GT(i.attn, prev);
    EXPECT_EQ(i.ffn, 2816.0);
    prev = i.attn;
  }
}

// I_attn(s) crosses a fixed turning point at exactly one s.
TEST(Intensities, SingleCrossing) {
  const auto m = model(2048, 4, 1408);
  const double threshold = 4000.0;
  int crossings = 0;
  bool above = false;
  for (std::int64_t s = 1; s <= 20000; ++s) {
    const bool now = arithmetic_intensities(m, workload(s)).attn > threshold;
    if (now != above) ++crossings;
    above = now;
  }
  EXPECT_EQ(crossings, 1);
}

TEST(TurningPoints, Values) {
  ClusterConfig c;
  c.gpu_peak = 100.0;
  c.ib_bw = 1.0;
  auto t = turning_points(c, 3, 1);
  EXPECT_DOUBLE_EQ(t.system, 100.0);
  EXPECT_DOUBLE_EQ(t.attention, 150.0);
  EXPECT_DOUBLE_EQ(t.ffn, 50.0);
  t = turning_points(c, 5, 5);
  EXPECT_DOUBLE_EQ(t.attention, t.system);
  EXPECT_DOUBLE_EQ(t.ffn, t.system);
}

TEST(TurningPoints, SumIdentityExact) {
  ClusterConfig c;
  c.gpu_peak = 989e12;
  c.ib_bw = 50e9;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> nodes(1, 512);
  for (int i = 0; i < 1000; ++i) {
    const auto t = turning_points<Rational>(c, nodes(rng), nodes(rng));
    EXPECT_EQ(t.attention + t.ffn, 2 * t.system);
  }
}

TEST(CostIdentities, ExactRatios) {
  std::mt19937_64 rng(12);
  auto U = [&](std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  };
  for (int i = 0; i < 1000; ++i) {
    const auto m = model(64 * U(1, 128), U(1, 8), 64 * U(1, 64), U(1, 8));
    const auto w = workload(U(1, 32768), U(1, 4));
    const Rational v(m2n_comm_bytes(m, w));
    const auto in = arithmetic_intensities<Rational>(m, w);
    EXPECT_EQ(attention_flops<Rational>(m, w) / v, in.attn);
    EXPECT_EQ(Rational(ffn_flops(m, w)) / v, in.ffn);
    EXPECT_EQ(attention_flops<Rational>(m, w),
              testing::oracle_attention_flops(w.micro_batch, w.seq_len, m.hidden, m.gqa_group));
    EXPECT_EQ(Rational(ffn_flops(m, w)),
              testing::oracle_ffn_flops(w.micro_batch, m.topk, w.seq_len, m.hidden, m.moe_hidden));
    EXPECT_EQ(v, testing::oracle_comm_bytes(2, w.micro_batch, w.seq_len, m.topk, m.hidden));
  }
}

TEST(CostBreakdown, PureAndConsistent) {
  const auto m = model(2048, 4, 1408);
  const auto w = workload(8192);
  ClusterConfig c;
  c.gpu_peak = 400e12;
  c.ib_bw = 100e9;
  const auto a = cost_breakdown(m, w, c, 2, 2);
  const auto b = cost_breakdown(m, w, c, 2, 2);
  EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
  EXPECT_EQ(a.turning_point, 4000.0);
}

TEST(Roofline, Attainable) {
  const double P = 1e12, B = 1e10, knee = P / B;
  EXPECT_EQ(roofline_attainable(knee, P, B), P);
  EXPECT_EQ(roofline_attainable(knee / 2, P, B), P / 2);
  EXPECT_EQ(roofline_attainable(knee * 7, P, B), P);
}

TEST(BackwardScale, Multiplier) {
  EXPECT_EQ(backward_scale(100.0), 200.0);
  EXPECT_EQ(backward_scale(0.0), 0.0);
  EXPECT_EQ(backward_scale(100.0, 3.0), 300.0);
}

TEST(StageTimes, ComputeBoundAttention) {
  ClusterConfig c;
  c.gpu_peak = 1e12;
  c.ib_bw = 1e11;
  c.total_gpus = 4;
  c.total_nics = 4;
  Allocation a{2, 2, 1, 1, 2, 2, 1, 3};
  StageInputs in;
  in.attn_flops = 6710886400.0;
  in.comm_bytes = 4194304.0;
  const auto t = stage_times(in, a, c);
  EXPECT_NEAR(t.t_attn, 3.3554432e-3, 1e-12);
  EXPECT_DOUBLE_EQ(t.t_m2n, 4194304.0 / 1e11);
}

TEST(StageTimes, Limits) {
  ClusterConfig c;
  c.gpu_peak = 1e12;
  c.ib_bw = 1e11;
  c.total_gpus = 4;
  c.total_nics = 4;
  Allocation a{2, 2, 1, 1, 2, 2, 1, 3};
  StageInputs in;
  in.attn_flops = 5e9;
  EXPECT_DOUBLE_EQ(stage_times(in, a, c).t_attn, 5e9 / 2e12);
  in.attn_flops = 0;
  in.comm_bytes = 3e8;
  EXPECT_DOUBLE_EQ(stage_times(in, a, c).t_attn, 3e8 / 1e11);
  EXPECT_DOUBLE_EQ(stage_times(in, a, c).t_ffn, 3e8 / 3e11);
}

}  // namespace
}  // namespace afpipe
