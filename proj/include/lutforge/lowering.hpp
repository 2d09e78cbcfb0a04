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

#include <optional>
#include <string>
#include <vector>

#include "lutforge/ir.hpp"
#include "lutforge/model.hpp"
#include "lutforge/resource.hpp"
#include "lutforge/table.hpp"

namespace lutforge {

struct LowerOptions {
  ExtractOptions extract;
  LutPrimitiveSpec lut;
};

/// Compiles an eval-mode model into a validated program. The program's
/// inputs are the input quantizer formats (flattened sample order) and its
/// outputs the flattened model outputs. Throws LoweringError when the model
/// is not compilable (float mode, uncalibrated, CLAMP on an L-LUT path) and
/// ExtractionError for tables that are too wide.
IrProgram lower(const Model& model, const LowerOptions& opts = {});

struct LayerReport {
  std::string name;  // "input", "layer<k>:<kind>", "output"
  std::size_t instructions = 0;
  std::size_t tables = 0;
  std::size_t table_bits = 0;
  std::size_t lluts = 0;
  // Zero-width L-LUTs and all-zero tables (per position).
  std::size_t pruned = 0;
  std::size_t folded = 0;
  double ebops = 0.0;
};

struct LowerReport {
  std::vector<LayerReport> sections;
  std::size_t program_length = 0;
  double ebops = 0.0;
  double est_luts = 0.0;
  double pruning_ratio = 0.0;  // zero-width L-LUTs / all L-LUTs
  std::string to_text() const;
  std::string to_csv() const;
};

LowerReport lower_report(const Model& model, const LowerOptions& opts = {});
// Same, reusing an already lowered program.
LowerReport lower_report(const Model& model, const IrProgram& program,
                         const LowerOptions& opts = {});

/// Index of the first CLAMP instruction that lies on a path into or out of
/// an LLUT, if any.
std::optional<std::size_t> clamp_on_llut_path(const IrProgram& p);

}  // namespace lutforge
