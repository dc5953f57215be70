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

#include <json.hpp>

#include "afpipe/errors.hpp"
#include "afpipe/trace_export.hpp"

namespace afpipe {
namespace {

ScheduleTrace one_task() {
  ScheduleTrace t;
  t.workers = {"A0"};
  TraceEvent e;
  e.task_id = 0;
  e.start_ns = 1000;
  e.end_ns = 2501000;
  t.events = {e};
  t.iteration_time_ns = 2501000;
  return t;
}

TEST(ExportTrace, EmptyTraceIsEmptyArray) {
  const auto doc = nlohmann::json::parse(export_trace(ScheduleTrace{}));
  ASSERT_TRUE(doc.is_array());
  EXPECT_TRUE(doc.empty());
}

TEST(ExportTrace, OneCompleteEvent) {
  const auto doc = nlohmann::json::parse(export_trace(one_task()));
  int complete = 0;
  for (const auto& ev : doc) {
    if (ev["ph"] != "X") continue;
    ++complete;
    EXPECT_DOUBLE_EQ(ev["dur"].get<double>(), 2500.0);
    EXPECT_DOUBLE_EQ(ev["ts"].get<double>(), 1.0);
    EXPECT_EQ(ev["pid"], 0);
    EXPECT_EQ(ev["tid"], 1);
  }
  EXPECT_EQ(complete, 1);
}

TEST(ExportTrace, StreamThreads) {
  ScheduleTrace t = one_task();
  TraceEvent e = t.events[0];
  e.task_id = 1;
  e.stream = Stream::kComm;
  e.lane = Lane::kRecv;
  e.kind = TaskKind::kM2NRecv;
  t.events.push_back(e);
  e.task_id = 2;
  e.lane = Lane::kSend;
  e.kind = TaskKind::kM2NSend;
  t.events.push_back(e);
  e.task_id = 3;
  e.stream = Stream::kBackward;
  e.lane = Lane::kCompute;
  e.kind = TaskKind::kBwdCompute;
  t.events.push_back(e);
  std::map<std::int64_t, int> tid;
  for (const auto& ev : nlohmann::json::parse(export_trace(t))) {
    if (ev["ph"] == "X") tid[ev["args"]["task"].get<std::int64_t>()] = ev["tid"].get<int>();
  }
  EXPECT_EQ(tid[0], 1);
  EXPECT_EQ(tid[1], 4);
  EXPECT_EQ(tid[2], 3);
  EXPECT_EQ(tid[3], 2);
}

TEST(ExportTrace, RoundTrip) {
  ScheduleTrace t;
  t.workers = {"A0", "F0", "A1"};
  for (std::int64_t i = 0; i < 50; ++i) {
    TraceEvent e;
    e.task_id = i;
    e.owner = i % 3;
    e.microbatch = i / 7;
    e.layer = i % 5;
    e.start_ns = i * 123457;
    e.end_ns = e.start_ns + 987 * (i + 1);
    e.kind = i % 2 ? TaskKind::kFwdCompute : TaskKind::kM2NSend;
    e.stream = i % 2 ? Stream::kForward : Stream::kComm;
    e.lane = i % 2 ? Lane::kCompute : Lane::kSend;
    t.events.push_back(e);
  }
  t.iteration_time_ns = t.events.back().end_ns;
  const auto back = parse_trace(export_trace(t));
  EXPECT_EQ(back.workers, t.workers);
  ASSERT_EQ(back.events.size(), t.events.size());
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    EXPECT_EQ(back.events[i].start_ns, t.events[i].start_ns);
    EXPECT_EQ(back.events[i].end_ns, t.events[i].end_ns);
    EXPECT_EQ(back.events[i].owner, t.events[i].owner);
  }
  EXPECT_EQ(back, t);
}

TEST(ExportTrace, Rejects) {
  ScheduleTrace t = one_task();
  t.events[0].owner = 4;
  EXPECT_THROW(export_trace(t), SerializationError);
  t = one_task();
  t.events[0].end_ns = 0;
  EXPECT_THROW(export_trace(t), SerializationError);
  EXPECT_THROW(parse_trace("{"), SerializationError);
  EXPECT_THROW(parse_trace("{}"), SerializationError);
  EXPECT_THROW(parse_trace(R"([{"ph":"X"}])"), SerializationError);
}

}  // namespace
}  // namespace afpipe
