// Copyright 2026 The GAC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace gac {

// Error hierarchy shared by all modules. The CLI maps each family onto an
// exit code (config 2, data/format 3, divergence 4).

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
  using Error::Error;
};

// Data-side failures: malformed files, shapes that do not match, values out
// of range.
struct DataError : Error {
  using Error::Error;
};

struct ShapeError : DataError {
  using DataError::DataError;
};

struct RangeError : DataError {
  using DataError::DataError;
};

struct FormatError : DataError {
  using DataError::DataError;
};

struct CorruptionError : DataError {
  using DataError::DataError;
};

struct TruncationError : DataError {
  using DataError::DataError;
};

struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace gac
