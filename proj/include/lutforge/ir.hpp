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
#include <span>
#include <string>
#include <vector>

#include "lutforge/fxp.hpp"
#include "lutforge/table.hpp"

namespace lutforge {

/// Opcodes. Every instruction except OUTPUT defines the wire whose id is its
/// own index. Values on wires are raw integers: value = raw * 2^-frac_bits.
enum class Op : std::uint8_t {
  kInput = 0,     // imm2 = input port
  kConst = 1,     // imm = raw value
  kAdd = 2,       // a + b, exact after fractional alignment
  kSub = 3,       // a - b
  kShl = 4,       // a * 2^imm2 (format relabel, raw unchanged)
  kShr = 5,       // a * 2^-imm2 (format relabel, raw unchanged)
  kBitSlice = 6,  // WRAP + TRN requantize to fmt
  kClamp = 7,     // SAT + TRN requantize to fmt
  kMulConst = 8,  // a * (imm * 2^-imm2)
  kLlut = 9,      // tables[imm2][bits(a)]
  kOutput = 10,   // output port imm2 <- a
};

std::string_view to_string(Op op);

struct Instr {
  Op op = Op::kConst;
  FxpFormat fmt;
  std::int32_t a = -1;
  std::int32_t b = -1;
  std::int32_t imm2 = 0;
  std::int64_t imm = 0;
  bool operator==(const Instr&) const = default;
};

struct IrProgram {
  std::vector<FxpFormat> input_formats;
  std::vector<FxpFormat> output_formats;
  std::vector<Instr> instrs;
  std::vector<TruthTable> tables;

  std::size_t n_inputs() const { return input_formats.size(); }
  std::size_t n_outputs() const { return output_formats.size(); }
  bool operator==(const IrProgram&) const = default;
};

/// Result-format rules shared by the builder and the validator.
FxpFormat add_format(const FxpFormat& a, const FxpFormat& b);
FxpFormat sub_format(const FxpFormat& a, const FxpFormat& b);
FxpFormat mul_const_format(const FxpFormat& a, std::int64_t c_raw, int c_frac);
FxpFormat shift_format(const FxpFormat& a, int k);  // value * 2^k

// Wires are limited to 64 bits signed / 63 bits unsigned so that every raw
// value fits an int64.
bool wire_width_ok(const FxpFormat& f);

/// Appends instructions while computing result formats.
class IrBuilder {
 public:
  IrBuilder(std::vector<FxpFormat> input_formats, std::size_t n_outputs);

  int input(std::size_t port);
  int constant(std::int64_t raw, const FxpFormat& fmt);
  int add(int a, int b);
  int sub(int a, int b);
  int shl(int a, int k);
  int shr(int a, int k);
  int bitslice(int a, const FxpFormat& fmt);
  int clamp(int a, const FxpFormat& fmt);
  int mul_const(int a, std::int64_t c_raw, int c_frac);
  int llut(int a, std::size_t table_id);
  void output(int a, std::size_t port);
  std::size_t add_table(TruthTable t);

  const FxpFormat& format(int wire) const { return prog_.instrs[wire].fmt; }
  const IrProgram& program() const noexcept { return prog_; }
  // Checks the program (throws IrError with all diagnostics) and returns it.
  IrProgram finish();

 private:
  int push(Instr in);
  IrProgram prog_;
};

struct Diagnostic {
  std::size_t instr = 0;
  std::string message;
};

/// Checks every program invariant; never throws. Empty means valid.
std::vector<Diagnostic> validate(const IrProgram& p);
std::string format_diagnostics(const std::vector<Diagnostic>& d);

/// Executes the program on one vector of input bit patterns. Throws IrError
/// on malformed inputs or a runtime overflow fault.
std::vector<std::uint64_t> interpret(const IrProgram& p, std::span<const std::uint64_t> inputs);

/// Row-major batch (rows x n_inputs) -> (rows x n_outputs). Parallel across
/// samples, capped by LUTFORGE_THREADS; results are order-preserving and
/// independent of the thread count. Faults name the sample index.
std::vector<std::uint64_t> interpret_batch(const IrProgram& p, std::span<const std::uint64_t> inputs);

/// Binary "LFIR" program file; see README for the layout.
std::string program_to_bytes(const IrProgram& p);
IrProgram program_from_bytes(const std::string& bytes);
void save_program(const std::string& path, const IrProgram& p);
IrProgram load_program(const std::string& path);

struct ProgramStats {
  std::size_t per_op[11] = {};
  std::size_t tables = 0;
  std::size_t table_entries = 0;
  std::size_t table_bits = 0;  // sum of 2^m * n
};
ProgramStats program_stats(const IrProgram& p);

}  // namespace lutforge
