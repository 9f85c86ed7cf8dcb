// Copyright 2026 The meltsim Authors
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

#ifndef MELTSIM_ERRORS_H_
#define MELTSIM_ERRORS_H_

#include <stdexcept>
#include <string>
#include <utility>

namespace meltsim {

// Base of every error thrown by the simulator. Architectural faults raised by
// simulated programs are values (see FaultKind), never exceptions.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

// Malformed instruction. field() names the offending operand.
class DecodeError : public Error {
 public:
  DecodeError(std::string field, const std::string& what)
      : Error("decode error in field '" + field + "': " + what),
        field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Assembly text could not be parsed.
class AssemblyError : public Error {
 public:
  AssemblyError(int line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Program is not well-formed (bad branch target, unbalanced TX markers).
class ProgramError : public Error {
 public:
  using Error::Error;
};

// Feature the simulated machine does not provide (nested transactions, TX on
// a core without transactional memory).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class SetupError : public Error {
 public:
  using Error::Error;
};

class CapabilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Text output of this library (hexdump) could not be read back.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace meltsim

#endif  // MELTSIM_ERRORS_H_
