// Copyright 2026 The panfuse Authors.
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

#ifndef PANFUSE_ERRORS_HPP_
#define PANFUSE_ERRORS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace panfuse {

// Root of every error thrown by the library. The CLI maps the subclasses onto
// process exit codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input that violates a documented precondition (shape mismatch, bad range).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation contract, e.g. ranking-mode merge without scores.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Annotation document and id image disagree, or a partition is broken.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Malformed document: missing fields, unknown categories, bad magic.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Segment id does not fit in 24 bits.
class EncodingOverflowError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or update during training. Carries the iteration index.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::int64_t iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"),
        iteration_(iteration) {}

  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

}  // namespace panfuse

#endif  // PANFUSE_ERRORS_HPP_
