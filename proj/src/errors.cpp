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

#include "afpipe/errors.hpp"

#include <utility>

namespace afpipe {
namespace {

std::string describe(ConfigError::Kind kind, const std::string& field,
                     const std::string& reason) {
  switch (kind) {
    case ConfigError::Kind::kMissingField:
      return "missing field '" + field + "'";
    case ConfigError::Kind::kInvalidValue:
      return "invalid value for '" + field + "': " + reason;
    case ConfigError::Kind::kSchemaViolation:
      return "schema violation at '" + field + "': " + reason;
    case ConfigError::Kind::kIo:
      return "cannot read '" + field + "': " + reason;
  }
  return reason;
}

}  // namespace

ConfigError::ConfigError(Kind kind, std::string field, std::string reason)
    : Error(describe(kind, field, reason)),
      kind_(kind),
      field_(std::move(field)),
      reason_(std::move(reason)) {}

}  // namespace afpipe
