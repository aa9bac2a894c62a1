// Copyright 2026 The s2m Authors
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

#ifndef S2M_ERRORS_HPP_
#define S2M_ERRORS_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace s2m {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidSpec : public Error {
 public:
  enum class Reason {
    kEmptyIntersection,
    kOverlappingSets,
    kIndexOutOfRange,
    kUnknownLabel,
    kMalformed,
  };

  InvalidSpec(Reason reason, const std::string& what)
      : Error(what), reason_(reason) {}

  Reason reason() const { return reason_; }

 private:
  Reason reason_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Both densities vanish (or are not finite) at the query point.
class DensityUndefined : public Error {
 public:
  using Error::Error;
};

/// A ratio provider returned a value outside its documented range.
class ProviderContractViolation : public Error {
 public:
  using Error::Error;
};

class InitializationExhausted : public Error {
 public:
  InitializationExhausted(std::size_t attempts, const std::string& what)
      : Error(what), attempts_(attempts) {}

  std::size_t attempts() const { return attempts_; }

 private:
  std::size_t attempts_;
};

class TrainingDiverged : public Error {
 public:
  TrainingDiverged(std::size_t step, const std::string& what)
      : Error(what), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

class DegenerateComponent : public Error {
 public:
  using Error::Error;
};

/// Configuration problem; `field()` is a dotted path into the config document.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field.empty() ? what : field + ": " + what),
        field_(std::move(field)),
        message_(what) {}

  const std::string& field() const { return field_; }
  /// The message without the field prefix.
  const std::string& message() const { return message_; }

 private:
  std::string field_;
  std::string message_;
};

}  // namespace s2m

#endif  // S2M_ERRORS_HPP_
