// Copyright 2026 The vflr Authors
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

namespace vflr {

// Base of every error the library throws. The CLI maps the concrete
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree (matrix/vector lengths).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An argument is outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Fixed-point value does not fit in the plaintext ring.
class OverflowError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Invalid or mutually incompatible configuration. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A party observed something the protocol state machine forbids. Exit code 3.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Input file could not be turned into a dataset. Exit code 4.
class IngestionError : public Error {
 public:
  using Error::Error;
};

// Malformed or version-mismatched binary file (transcript, key). Exit code 4.
class ParseError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": length mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail
}  // namespace vflr
