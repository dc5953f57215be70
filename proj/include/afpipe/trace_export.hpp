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

#include <string>
#include <string_view>

#include "afpipe/simulator.hpp"

namespace afpipe {

// Trace-event JSON array: one complete ("X") event per task, pid = worker,
// tid = stream (1 forward, 2 backward, 3 comm send, 4 comm recv),
// timestamps in microseconds. Worker and stream names are emitted as
// metadata events when the trace is not empty.
std::string export_trace(const ScheduleTrace& trace);

// Inverse of export_trace. Throws SerializationError on malformed input.
ScheduleTrace parse_trace(std::string_view document);

}  // namespace afpipe
