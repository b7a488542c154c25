// Copyright 2026 The deepgen authors
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

#ifndef DEEPGEN_ERRORS_HPP
#define DEEPGEN_ERRORS_HPP

#include <stdexcept>
#include <string>

/// \file
/// \brief Exception hierarchy used across the library.
///
/// Every error raised by the library derives from deepgen::Error so callers
/// can catch one base type. The concrete subtypes partition failures by how
/// a caller should react: bad argument values, mismatched tensor shapes,
/// unreadable or truncated files, unsupported operations, and numerical
/// breakdown during estimation or optimization.

namespace deepgen {

/// Base type for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scalar argument is outside its valid range (probability, scale, count).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions do not match what an operation requires.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration file, manifest, or command line is malformed or incomplete.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A data file does not start with a recognized layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A data file has a recognized layout but its contents are truncated or
/// internally inconsistent.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// The requested operation is not defined for the given model or layer kind.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// All importance weights underflowed; no normalized weight can be formed.
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// A gradient or state update produced non-finite values.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint or artifact was produced under a different configuration.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

}  // namespace deepgen

#endif  // DEEPGEN_ERRORS_HPP
