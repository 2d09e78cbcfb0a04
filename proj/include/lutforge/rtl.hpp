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
#include <span>
#include <string>
#include <vector>

#include "lutforge/ir.hpp"

namespace lutforge {

struct RtlOptions {
  // Logic levels (ADD, SUB, MUL_CONST, CLAMP, LLUT) per pipeline stage;
  // 0 disables pipeline registers.
  int stage_depth = 4;
  std::string module_name = "top";
};

struct RtlDesign {
  std::string top_v;
  // Pipeline register banks between input and output registers.
  int stages = 0;
  // Cycles from in_data capture to out_data: 1 + stages + 1.
  int latency = 2;
  int in_width = 0;
  int out_width = 0;
};

/// Inputs are packed port 0 at the least significant end of in_data, each
/// port taking its format width; outputs likewise in out_data.
RtlDesign emit_verilog(const IrProgram& p, const RtlOptions& opts = {});

struct RtlTestbench {
  std::string tb_v;
  std::string stimuli_hex;
  std::string expected_hex;
};

/// Self-checking testbench reading stimuli.hex / expected.hex from the
/// working directory; $fatal on the first run with any mismatch.
RtlTestbench emit_testbench(const IrProgram& p, const RtlDesign& d,
                            std::span<const std::uint64_t> inputs,
                            std::span<const std::uint64_t> expected,
                            const RtlOptions& opts = {});

/// Uniform random input bit patterns over each input format
/// (rows x n_inputs), seeded.
std::vector<std::uint64_t> random_inputs(const IrProgram& p, std::size_t rows,
                                         std::uint64_t seed);

/// Writes top.v, tb_top.v, stimuli.hex, expected.hex and latency.txt into
/// dir, using n_vectors random inputs and interpreter outputs.
RtlDesign write_rtl_bundle(const IrProgram& p, const std::string& dir,
                           std::size_t n_vectors, std::uint64_t seed,
                           const RtlOptions& opts = {});

}  // namespace lutforge
