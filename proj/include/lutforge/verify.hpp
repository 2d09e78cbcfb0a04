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

#include <cstdint>
#include <optional>
#include <string>

#include "lutforge/ir.hpp"
#include "lutforge/model.hpp"

namespace lutforge {

struct Mismatch {
  std::size_t vector = 0;
  std::size_t output = 0;
  double model_value = 0.0;
  double program_value = 0.0;
};

struct VerifyResult {
  std::size_t vectors = 0;
  std::size_t mismatches = 0;
  std::optional<Mismatch> first;
  std::string summary() const;
};

/// Decodes (rows x n_inputs) bit patterns into a model input batch.
Tensor decode_inputs(const IrProgram& p, const Shape& sample_shape,
                     std::span<const std::uint64_t> bits);

/// Runs n seeded random input vectors through the interpreter and the
/// eval-mode forward pass and compares every output exactly.
VerifyResult verify(const Model& model, const IrProgram& p, std::size_t n,
                    std::uint64_t seed);

}  // namespace lutforge
