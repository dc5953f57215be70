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
#include <string>

#include "afpipe/errors.hpp"
#include "afpipe/experiment.hpp"
#include "test_support.hpp"

namespace afpipe {
namespace {

const char* kDeepSeek = R"(
[model]
layers = 28
hidden = 2048
experts = 64
topk = 4
moe_hidden = 1408

[workload]
seq_len = 8192
micro_batch = 1

[cluster]
total_gpus = 32
total_nics = 32
gpu_peak = 400e12
ib_bw = 100e9
)";

std::string with_model(const std::string& model_body) {
  return "[model]\n" + model_body +
         "\n[workload]\nseq_len = 16\nmicro_batch = 1\n"
         "[cluster]\ntotal_gpus = 4\ntotal_nics = 4\ngpu_peak = 1e12\nib_bw = 1e9\n";
}

TEST(ParseExperiment, DeepSeekCard) {
  const Experiment e = parse_experiment(kDeepSeek);
  EXPECT_EQ(e.model.layers, 28);
  EXPECT_EQ(e.model.hidden, 2048);
  EXPECT_EQ(e.model.experts, 64);
  EXPECT_EQ(e.model.topk, 4);
  EXPECT_EQ(e.model.moe_hidden, 1408);
  EXPECT_TRUE(validate(e).empty());
}

TEST(ParseExperiment, Defaults) {
  const Experiment e = parse_experiment(kDeepSeek);
  EXPECT_EQ(e.model.bytes_per_element, 2);
  EXPECT_EQ(e.model.gqa_group, 1);
  EXPECT_EQ(e.workload.num_microbatches, 1);
  EXPECT_EQ(e.pipeline_depth, 1);
  EXPECT_EQ(e.virtual_stages, 1);
  EXPECT_EQ(e.schedule_kind, ScheduleKind::kAfPipe);
  EXPECT_DOUBLE_EQ(e.backward_multiplier, 2.0);
}

TEST(ParseExperiment, TopkAboveExperts) {
  try {
    parse_experiment(with_model("layers=1\nhidden=8\nexperts=4\ntopk=8\nmoe_hidden=8"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_EQ(err.kind(), ConfigError::Kind::kInvalidValue);
    EXPECT_EQ(err.field(), "topk");
    EXPECT_EQ(err.reason(), "k exceeds E");
  }
}

TEST(ParseExperiment, MissingField) {
  try {
    parse_experiment(with_model("layers=1\nhidden=8\nexperts=4\ntopk=2"));
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& err) {
    EXPECT_EQ(err.kind(), ConfigError::Kind::kMissingField);
    EXPECT_EQ(err.field(), "moe_hidden");
  }
}

TEST(ParseExperiment, UnknownKeyAndSection) {
  EXPECT_THROW(parse_experiment(with_model(
                   "layers=1\nhidden=8\nexperts=4\ntopk=2\nmoe_hidden=8\ncolour=blue")),
               ConfigError);
  EXPECT_THROW(parse_experiment(std::string(kDeepSeek) + "\n[extra]\nx = 1\n"), ConfigError);
}

TEST(ParseExperiment, MalformedNumbers) {
  EXPECT_THROW(parse_experiment(with_model(
                   "layers=one\nhidden=8\nexperts=4\ntopk=2\nmoe_hidden=8")),
               ConfigError);
  EXPECT_THROW(parse_experiment(with_model(
                   "layers=2.5\nhidden=8\nexperts=4\ntopk=2\nmoe_hidden=8")),
               ConfigError);
}

TEST(ParseExperiment, ScheduleKindNames) {
  for (ScheduleKind k : kAllScheduleKinds) {
    EXPECT_EQ(parse_schedule_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_schedule_kind("dualpipe"), ConfigError);
}

TEST(LoadExperiment, MissingFileNamesPath) {
  try {
    load_experiment("/nonexistent/dir/x.cfg");
    FAIL();
  } catch (const ConfigError& err) {
    EXPECT_EQ(err.kind(), ConfigError::Kind::kIo);
    EXPECT_NE(std::string(err.what()).find("/nonexistent/dir/x.cfg"), std::string::npos);
  }
}

TEST(LoadExperiment, ShippedConfigs) {
  for (const char* name : {"deepseek.cfg", "toy.cfg"}) {
    const Experiment e = load_experiment(std::string(AFPIPE_SOURCE_DIR) + "/configs/" + name);
    EXPECT_TRUE(validate(e).empty()) << name;
  }
}

TEST(Validate, DepthTimesChunksAboveLayers) {
  Experiment e = parse_experiment(kDeepSeek);
  e.pipeline_depth = 4;
  e.virtual_stages = 8;
  const auto v = validate(e);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].rule, "pipeline_depth*virtual_stages <= L");
}

TEST(Validate, SingleGpu) {
  Experiment e = parse_experiment(kDeepSeek);
  e.cluster.total_gpus = 1;
  e.ep_size = 1;
  const auto v = validate(e);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].field, "total_gpus");
  EXPECT_EQ(v[0].rule, "total_gpus >= 2");
}

TEST(Validate, HugeDepthDoesNotWrap) {
  Experiment e = parse_experiment(kDeepSeek);
  e.pipeline_depth = std::int64_t{1} << 62;
  e.virtual_stages = 4;
  EXPECT_FALSE(validate(e).empty());
}

// parse(serialize(x)) == x, and parse is deterministic.
TEST(ExperimentProperty, RoundTrip) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 300; ++i) {
    const auto kind = kAllScheduleKinds[i % 4];
    Experiment e = testing::random_experiment(rng, kind);
    e.backward_multiplier = 1.0 + 0.125 * (i % 9);
    e.cluster.nvlink_bw = 1.5e11 * (i % 3);
    e.cluster.gpu_memory = 4e10 + 1.25e9 * i;
    ASSERT_TRUE(validate(e).empty()) << i;
    const std::string text = serialize_experiment(e);
    const Experiment back = parse_experiment(text);
    EXPECT_EQ(back, e) << text;
    EXPECT_EQ(parse_experiment(text), back);
    EXPECT_EQ(serialize_experiment(back), text);
  }
}

}  // namespace
}  // namespace afpipe
