// Copyright 2026 The DiRotQ Authors.
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

#ifndef DIROTQ_ERROR_HPP_
#define DIROTQ_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dirotq {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible shapes or indices.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Bad arguments, configuration values or violated preconditions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-convergence, failed factorizations, non-finite data.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Malformed files or records.
class FormatError : public Error {
 public:
  using Error::Error;
};

inline std::string shape_string(std::size_t rows, std::size_t cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace dirotq

#endif  // DIROTQ_ERROR_HPP_
