// Copyright 2026 The uamfair Authors
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

namespace uamfair {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed input file or structurally invalid model.
class InputError : public Error {
 public:
  using Error::Error;
};

// The optimization problem has no feasible point (e.g. the allocation
// floor cannot be met). Maps to CLI exit code 2.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed to converge within its budget.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace uamfair
