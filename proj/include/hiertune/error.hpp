// Copyright (c) 2026 The hiertune Authors. All Rights Reserved.
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

namespace hiertune {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (workload files, trajectory logs, protocol lines).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed but violates a domain invariant or a documented range.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An action was applied although its mask entry is false.
class InvalidActionError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint missing, truncated, corrupt or of another format version.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A count does not fit the integer type it is reported in.
class OverflowError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown during training (NaN / Inf losses).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hiertune
