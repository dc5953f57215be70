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

#include <stdexcept>
#include <string>

namespace afpipe {

// Base of every error thrown by the library. Callers that only need a
// message can catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  enum class Kind { kMissingField, kInvalidValue, kSchemaViolation, kIo };

  ConfigError(Kind kind, std::string field, std::string reason);

  Kind kind() const { return kind_; }
  const std::string& field() const { return field_; }
  const std::string& reason() const { return reason_; }

 private:
  Kind kind_;
  std::string field_;
  std::string reason_;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

class PlacementError : public Error {
 public:
  using Error::Error;
};

// Simulation-side failures (exit code 3 in the CLI).
class SimulationError : public Error {
 public:
  using Error::Error;
};

class GraphConstructionError : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class CycleDetected : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class NegativeDuration : public SimulationError {
 public:
  using SimulationError::SimulationError;
};

class SerializationError : public Error {
 public:
  using Error::Error;
};

class NoFeasible : public Error {
 public:
  using Error::Error;
};

class SearchSpaceTooLarge : public Error {
 public:
  using Error::Error;
};

}  // namespace afpipe
