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

#include "afpipe/trace_export.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <fmt/format.h>
#include <json.hpp>

#include "afpipe/errors.hpp"

namespace afpipe {
namespace {

using nlohmann::json;

int thread_of(const TraceEvent& e) {
  switch (e.stream) {
    case Stream::kForward:
      return 1;
    case Stream::kBackward:
      return 2;
    case Stream::kComm:
      return e.lane == Lane::kRecv ? 4 : 3;
  }
  return 0;
}

constexpr std::string_view kThreadNames[] = {"", "forward", "backward",
                                             "comm-send", "comm-recv"};

template <typename Enum, std::size_t N>
Enum enum_from(std::string_view text, const Enum (&all)[N]) {
  for (auto v : all) {
    if (to_string(v) == text) return v;
  }
  throw SerializationError(fmt::format("unknown value '{}'", text));
}

constexpr TaskKind kKinds[] = {TaskKind::kFwdCompute, TaskKind::kBwdCompute,
                               TaskKind::kM2NSend,    TaskKind::kM2NRecv,
                               TaskKind::kA2A,        TaskKind::kP2P};
constexpr Stream kStreams[] = {Stream::kForward, Stream::kBackward, Stream::kComm};
constexpr Lane kLaneValues[] = {Lane::kCompute, Lane::kSend, Lane::kRecv};

double micros(std::int64_t ns) { return static_cast<double>(ns) / 1000.0; }

}  // namespace

std::string export_trace(const ScheduleTrace& trace) {
  json doc = json::array();
  if (!trace.events.empty()) {
    for (std::size_t w = 0; w < trace.workers.size(); ++w) {
      doc.push_back({{"name", "process_name"}, {"ph", "M"}, {"pid", w},
                     {"args", {{"name", trace.workers[w]}}}});
      for (int tid = 1; tid <= 4; ++tid) {
        doc.push_back({{"name", "thread_name"}, {"ph", "M"}, {"pid", w}, {"tid", tid},
                       {"args", {{"name", kThreadNames[tid]}}}});
      }
    }
  }
  for (const auto& e : trace.events) {
    if (e.owner < 0 || static_cast<std::size_t>(e.owner) >= trace.workers.size()) {
      throw SerializationError(
          fmt::format("event for task {} has unknown owner {}", e.task_id, e.owner));
    }
    if (e.end_ns < e.start_ns) {
      throw SerializationError(fmt::format("event for task {} ends before it starts", e.task_id));
    }
    doc.push_back({
        {"name", fmt::format("{} L{} mb{}", to_string(e.kind), e.layer, e.microbatch)},
        {"cat", to_string(e.kind)},
        {"ph", "X"},
        {"ts", micros(e.start_ns)},
        {"dur", micros(e.end_ns - e.start_ns)},
        {"pid", e.owner},
        {"tid", thread_of(e)},
        {"args",
         {{"task", e.task_id},
          {"microbatch", e.microbatch},
          {"layer", e.layer},
          {"stream", to_string(e.stream)},
          {"lane", to_string(e.lane)}}},
    });
  }
  return doc.dump(1);
}

ScheduleTrace parse_trace(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::exception& ex) {
    throw SerializationError(fmt::format("invalid trace JSON: {}", ex.what()));
  }
  if (!doc.is_array()) throw SerializationError("trace document must be an array");

  ScheduleTrace trace;
  std::map<std::int64_t, std::string> names;
  try {
    for (const auto& ev : doc) {
      const auto ph = ev.at("ph").get<std::string>();
      if (ph == "M") {
        if (ev.at("name") == "process_name") {
          names[ev.at("pid").get<std::int64_t>()] = ev.at("args").at("name").get<std::string>();
        }
        continue;
      }
      if (ph != "X") throw SerializationError(fmt::format("unsupported phase '{}'", ph));
      const auto& args = ev.at("args");
      TraceEvent e;
      e.task_id = args.at("task").get<std::int64_t>();
      e.owner = ev.at("pid").get<std::int64_t>();
      e.kind = enum_from(ev.at("cat").get<std::string>(), kKinds);
      e.stream = enum_from(args.at("stream").get<std::string>(), kStreams);
      e.lane = enum_from(args.at("lane").get<std::string>(), kLaneValues);
      e.microbatch = args.at("microbatch").get<std::int64_t>();
      e.layer = args.at("layer").get<std::int64_t>();
      const double ts = ev.at("ts").get<double>();
      const double dur = ev.at("dur").get<double>();
      if (!std::isfinite(ts) || !std::isfinite(dur) || dur < 0.0) {
        throw SerializationError(fmt::format("bad timing for task {}", e.task_id));
      }
      e.start_ns = std::llround(ts * 1000.0);
      e.end_ns = e.start_ns + std::llround(dur * 1000.0);
      trace.iteration_time_ns = std::max(trace.iteration_time_ns, e.end_ns);
      trace.events.push_back(e);
    }
  } catch (const json::exception& ex) {
    throw SerializationError(fmt::format("malformed trace event: {}", ex.what()));
  }
  for (const auto& [pid, name] : names) {
    if (pid != static_cast<std::int64_t>(trace.workers.size())) {
      throw SerializationError(fmt::format("process ids are not contiguous at {}", pid));
    }
    trace.workers.push_back(name);
  }
  return trace;
}

}  // namespace afpipe
