// Copyright 2026 The LutForge Authors. All Rights Reserved.
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

namespace lutforge {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: backward without forward, eval on an uncalibrated quantizer...
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// A real value that is not representable in the requested fixed-point format.
class EncodingError : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  using Error::Error;
};

class LoweringError : public Error {
 public:
  using Error::Error;
};

// Malformed input files: CSV rows, tensor caches, manifests, program files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid program or a runtime overflow fault in the interpreter.
class IrError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace lutforge
