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

#include "lutforge/rtl.hpp"

#include <algorithm>
#include <random>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"

namespace lutforge {

namespace {

std::string hex_digits(unsigned __int128 v, int width) {
  const int digits = std::max(1, (width + 3) / 4);
  std::string s(static_cast<std::size_t>(digits), '0');
  for (int k = digits - 1; k >= 0; --k) {
    s[static_cast<std::size_t>(k)] = "0123456789abcdef"[static_cast<int>(v & 0xF)];
    v >>= 4;
  }
  return s;
}

unsigned __int128 mask128(int width) {
  return width >= 128 ? ~static_cast<unsigned __int128>(0)
                      : (static_cast<unsigned __int128>(1) << width) - 1;
}

std::string lit(__int128 value, int width) {
  return std::to_string(width) + "'h" +
         hex_digits(static_cast<unsigned __int128>(value) & mask128(width), width);
}

std::string wname(int id) { return "w" + std::to_string(id); }

// Bit b of a named vector; plain name for 1-bit vectors.
std::string bit(const std::string& name, int b, int width) {
  return width == 1 ? name : name + "[" + std::to_string(b) + "]";
}

std::string range(const std::string& name, int hi, int lo, int width) {
  if (lo == 0 && hi == width - 1) return name;
  if (hi == lo) return bit(name, hi, width);
  return name + "[" + std::to_string(hi) + ":" + std::to_string(lo) + "]";
}

// (sign- or zero-extended src) << shift, truncated to target bits.
std::string extend(const std::string& name, int src_w, bool src_signed, int target, int shift) {
  const int avail = target - shift;
  if (avail <= 0) return lit(0, target);
  std::string body;
  if (src_w >= avail) {
    body = range(name, avail - 1, 0, src_w);
  } else {
    const std::string sign = src_signed ? bit(name, src_w - 1, src_w) : "1'b0";
    body = "{{" + std::to_string(avail - src_w) + "{" + sign + "}}, " + name + "}";
  }
  if (shift > 0) body = "{" + body + ", " + std::to_string(shift) + "'d0}";
  return body;
}

struct Emitter {
  const IrProgram& p;
  const RtlOptions& opts;
  std::vector<int> level, stage;
  std::vector<int> max_delay;  // longest delay chain needed per wire
  int last_stage = 0;

  bool free_op(Op op) {
    return op == Op::kInput || op == Op::kConst || op == Op::kBitSlice || op == Op::kShl ||
           op == Op::kShr || op == Op::kOutput;
  }

  void schedule() {
    const std::size_t n = p.instrs.size();
    level.assign(n, 0);
    stage.assign(n, 0);
    max_delay.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const Instr& in = p.instrs[i];
      int l = 0;
      if (in.a >= 0) l = level[in.a];
      if (in.b >= 0) l = std::max(l, level[in.b]);
      if (!free_op(in.op)) ++l;
      level[i] = l;
      stage[i] = (opts.stage_depth <= 0 || l == 0) ? 0 : (l - 1) / opts.stage_depth;
      if (in.op != Op::kOutput) last_stage = std::max(last_stage, stage[i]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      const Instr& in = p.instrs[i];
      const int consumer = in.op == Op::kOutput ? last_stage : stage[i];
      for (int o : {in.a, in.b}) {
        if (o < 0 || p.instrs[o].op == Op::kConst) continue;
        max_delay[o] = std::max(max_delay[o], consumer - stage[o]);
      }
    }
  }

  std::string ref(int id, int consumer_stage) {
    if (p.instrs[id].op == Op::kConst) return wname(id);
    const int d = consumer_stage - stage[id];
    return d == 0 ? wname(id) : wname(id) + "_d" + std::to_string(d);
  }
};

}  // namespace

RtlDesign emit_verilog(const IrProgram& p, const RtlOptions& opts) {
  const auto diags = validate(p);
  if (!diags.empty()) throw IrError("cannot emit an invalid program:\n" + format_diagnostics(diags));
  Emitter em{p, opts, {}, {}, {}, 0};
  em.schedule();

  RtlDesign d;
  std::vector<int> in_off(p.n_inputs()), out_off(p.n_outputs());
  for (std::size_t k = 0; k < p.n_inputs(); ++k) {
    in_off[k] = d.in_width;
    d.in_width += p.input_formats[k].width();
  }
  for (std::size_t k = 0; k < p.n_outputs(); ++k) {
    out_off[k] = d.out_width;
    d.out_width += p.output_formats[k].width();
  }
  const int iw = std::max(d.in_width, 1);
  const int ow = std::max(d.out_width, 1);
  d.stages = em.last_stage;
  d.latency = 1 + d.stages + 1;

  std::string funcs, body, regs, seq;
  for (std::size_t t = 0; t < p.tables.size(); ++t) {
    const TruthTable& tab = p.tables[t];
    const int m = tab.m(), n = tab.n();
    const std::string fn = "llut" + std::to_string(t);
    funcs += "  function automatic [" + std::to_string(n - 1) + ":0] " + fn + ";\n";
    funcs += "    input [" + std::to_string(m - 1) + ":0] x;\n";
    funcs += "    begin\n      case (x)\n";
    for (std::size_t k = 0; k < tab.entries.size(); ++k) {
      funcs += "        " + lit(static_cast<__int128>(k), m) + ": " + fn + " = " +
               lit(static_cast<__int128>(tab.entries[k]), n) + ";\n";
    }
    funcs += "      endcase\n    end\n  endfunction\n\n";
  }

  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instr& in = p.instrs[i];
    if (in.op == Op::kOutput) continue;
    const int w = in.fmt.width();
    const int id = static_cast<int>(i);
    const int s = em.stage[i];
    const std::string decl = "  wire [" + std::to_string(w - 1) + ":0] " + wname(id);
    auto operand = [&](int o) { return em.ref(o, s); };
    const FxpFormat* fa = in.a >= 0 ? &p.instrs[in.a].fmt : nullptr;
    std::string expr;
    switch (in.op) {
      case Op::kInput:
        expr = range("in_r", in_off[in.imm2] + w - 1, in_off[in.imm2], iw);
        break;
      case Op::kConst:
        expr = lit(in.imm, w);
        break;
      case Op::kAdd:
      case Op::kSub: {
        const FxpFormat& fb = p.instrs[in.b].fmt;
        const std::string x = extend(operand(in.a), fa->width(), fa->is_signed, w,
                                     in.fmt.frac_bits - fa->frac_bits);
        const std::string y = extend(operand(in.b), fb.width(), fb.is_signed, w,
                                     in.fmt.frac_bits - fb.frac_bits);
        expr = x + (in.op == Op::kAdd ? " + " : " - ") + y;
        break;
      }
      case Op::kShl:
      case Op::kShr:
        expr = operand(in.a);
        break;
      case Op::kMulConst:
        expr = extend(operand(in.a), fa->width(), fa->is_signed, w, 0) + " * " + lit(in.imm, w);
        break;
      case Op::kLlut:
        expr = "llut" + std::to_string(in.imm2) + "(" + operand(in.a) + ")";
        break;
      case Op::kBitSlice: {
        const int shift = in.fmt.frac_bits - fa->frac_bits;
        const int wa = fa->width();
        const std::string a = operand(in.a);
        if (shift >= 0) {
          expr = extend(a, wa, fa->is_signed, w, shift);
        } else {
          const int lo = -shift;
          const int hi = lo + w - 1;
          const std::string sign = fa->is_signed ? bit(a, wa - 1, wa) : "1'b0";
          if (lo > wa - 1) {
            expr = "{" + std::to_string(w) + "{" + sign + "}}";
          } else if (hi <= wa - 1) {
            expr = range(a, hi, lo, wa);
          } else {
            expr = "{{" + std::to_string(hi - wa + 1) + "{" + sign + "}}, " + range(a, wa - 1, lo, wa) + "}";
          }
        }
        break;
      }
      case Op::kClamp: {
        const int shift = in.fmt.frac_bits - fa->frac_bits;
        const int wa = fa->width();
        const std::string a = operand(in.a);
        const int wt = std::max(wa + std::max(shift, 0), w) + 2;
        if (wt > 127) throw IrError("CLAMP at instruction " + std::to_string(i) + " is too wide to emit");
        const std::string t = wname(id) + "_t";
        std::string texpr;
        if (shift >= 0) {
          texpr = extend(a, wa, fa->is_signed, wt, shift);
        } else if (-shift > wa - 1) {
          const std::string sign = fa->is_signed ? bit(a, wa - 1, wa) : "1'b0";
          texpr = "{" + std::to_string(wt) + "{" + sign + "}}";
        } else {
          const std::string sh = wname(id) + "_s";
          const int ws = wa + shift;
          body += "  wire [" + std::to_string(ws - 1) + ":0] " + sh + " = " + range(a, wa - 1, -shift, wa) + ";\n";
          texpr = extend(sh, ws, fa->is_signed, wt, 0);
        }
        body += "  wire [" + std::to_string(wt - 1) + ":0] " + t + " = " + texpr + ";\n";
        expr = "($signed(" + t + ") > $signed(" + lit(in.fmt.max_raw(), wt) + ")) ? " +
               lit(in.fmt.max_raw(), w) + " : ($signed(" + t + ") < $signed(" +
               lit(in.fmt.min_raw(), wt) + ")) ? " + lit(in.fmt.min_raw(), w) + " : " +
               range(t, w - 1, 0, wt);
        break;
      }
      case Op::kOutput:
        break;
    }
    body += decl + " = " + expr + ";\n";
    for (int k = 1; k <= em.max_delay[i]; ++k) {
      const std::string r = wname(id) + "_d" + std::to_string(k);
      regs += "  reg [" + std::to_string(w - 1) + ":0] " + r + ";\n";
      seq += "    " + r + " <= " + (k == 1 ? wname(id) : wname(id) + "_d" + std::to_string(k - 1)) + ";\n";
    }
  }

  std::string out_expr;
  if (d.out_width == 0) {
    out_expr = "1'b0";
  } else {
    std::vector<std::string> parts(p.n_outputs());
    for (const Instr& in : p.instrs) {
      if (in.op == Op::kOutput) parts[in.imm2] = em.ref(in.a, em.last_stage);
    }
    out_expr = "{";
    for (std::size_t k = parts.size(); k-- > 0;) {
      out_expr += parts[k];
      if (k != 0) out_expr += ", ";
    }
    out_expr += "}";
  }

  std::string v;
  v += "// Generated by lutforge. Do not edit.\n";
  v += "// Latency: " + std::to_string(d.latency) + " cycles (input register, " +
       std::to_string(d.stages) + " pipeline stages, output register).\n\n";
  v += "module " + opts.module_name + " (\n";
  v += "  input  wire clk,\n  input  wire rst_n,\n  input  wire in_valid,\n";
  v += "  input  wire [" + std::to_string(iw - 1) + ":0] in_data,\n";
  v += "  output reg  out_valid,\n";
  v += "  output reg  [" + std::to_string(ow - 1) + ":0] out_data\n);\n\n";
  v += funcs;
  v += "  reg [" + std::to_string(iw - 1) + ":0] in_r;\n";
  v += "  reg [" + std::to_string(d.latency - 2) + ":0] valid_r;\n";
  v += regs;
  v += "\n" + body + "\n";
  v += "  always @(posedge clk) begin\n    in_r <= in_data;\n" + seq;
  v += "    out_data <= " + out_expr + ";\n  end\n\n";
  v += "  always @(posedge clk) begin\n    if (!rst_n) begin\n";
  v += "      valid_r <= " + lit(0, d.latency - 1) + ";\n      out_valid <= 1'b0;\n";
  v += "    end else begin\n";
  if (d.latency - 1 == 1) {
    v += "      valid_r <= in_valid;\n";
  } else {
    v += "      valid_r <= {valid_r[" + std::to_string(d.latency - 3) + ":0], in_valid};\n";
  }
  v += "      out_valid <= " + bit("valid_r", d.latency - 2, d.latency - 1) + ";\n";
  v += "    end\n  end\n\nendmodule\n";
  d.top_v = std::move(v);
  return d;
}

namespace {

std::string pack_hex(std::span<const std::uint64_t> words, std::span<const FxpFormat> fmts, int total) {
  const int width = std::max(total, 1);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>((width + 3) / 4 * 4), 0);
  int off = 0;
  for (std::size_t k = 0; k < fmts.size(); ++k) {
    const int w = fmts[k].width();
    for (int b = 0; b < w; ++b) bits[static_cast<std::size_t>(off + b)] = (words[k] >> b) & 1U;
    off += w;
  }
  std::string s;
  for (std::size_t nib = bits.size() / 4; nib-- > 0;) {
    const int v = bits[nib * 4] | (bits[nib * 4 + 1] << 1) | (bits[nib * 4 + 2] << 2) | (bits[nib * 4 + 3] << 3);
    s += "0123456789abcdef"[v];
  }
  return s + "\n";
}

}  // namespace

RtlTestbench emit_testbench(const IrProgram& p, const RtlDesign& d,
                            std::span<const std::uint64_t> inputs,
                            std::span<const std::uint64_t> expected, const RtlOptions& opts) {
  const std::size_t ni = p.n_inputs(), no = p.n_outputs();
  const std::size_t rows = ni != 0 ? inputs.size() / ni : (no != 0 ? expected.size() / no : 0);
  if ((ni != 0 && inputs.size() != rows * ni) || expected.size() != rows * no) {
    throw UsageError("testbench vectors do not match the program's port counts");
  }
  RtlTestbench tb;
  for (std::size_t r = 0; r < rows; ++r) {
    tb.stimuli_hex += pack_hex(inputs.subspan(r * ni, ni), p.input_formats, d.in_width);
    tb.expected_hex += pack_hex(expected.subspan(r * no, no), p.output_formats, d.out_width);
  }
  const int iw = std::max(d.in_width, 1), ow = std::max(d.out_width, 1);
  const std::string n = std::to_string(rows);
  const std::string depth = std::to_string(std::max<std::size_t>(rows, 1));
  std::string v;
  v += "// Generated by lutforge. Do not edit.\n`timescale 1ns/1ps\n\n";
  v += "module tb_" + opts.module_name + ";\n";
  v += "  localparam integer N = " + n + ";\n";
  v += "  localparam integer LATENCY = " + std::to_string(d.latency) + ";\n";
  v += "  reg clk;\n  reg rst_n;\n  reg in_valid;\n";
  v += "  reg [" + std::to_string(iw - 1) + ":0] in_data;\n";
  v += "  wire out_valid;\n  wire [" + std::to_string(ow - 1) + ":0] out_data;\n";
  v += "  reg [" + std::to_string(iw - 1) + ":0] stim [0:" + depth + "-1];\n";
  v += "  reg [" + std::to_string(ow - 1) + ":0] expv [0:" + depth + "-1];\n";
  v += "  integer i;\n  integer k;\n  integer errors;\n\n";
  v += "  " + opts.module_name +
       " dut (.clk(clk), .rst_n(rst_n), .in_valid(in_valid), .in_data(in_data),\n"
       "      .out_valid(out_valid), .out_data(out_data));\n\n";
  v += "  initial begin\n    clk = 1'b0;\n    forever #5 clk = ~clk;\n  end\n\n";
  v += "  initial begin\n";
  if (rows != 0) {
    v += "    $readmemh(\"stimuli.hex\", stim);\n    $readmemh(\"expected.hex\", expv);\n";
  }
  v += "    errors = 0;\n    rst_n = 1'b0;\n    in_valid = 1'b0;\n    in_data = " + lit(0, iw) + ";\n";
  v += "    @(posedge clk);\n    @(posedge clk);\n    #1 rst_n = 1'b1;\n";
  v += "    for (i = 0; i < N + LATENCY; i = i + 1) begin\n";
  v += "      if (i < N) begin\n        in_data = stim[i];\n        in_valid = 1'b1;\n";
  v += "      end else begin\n        in_valid = 1'b0;\n      end\n";
  v += "      @(posedge clk);\n      #1;\n";
  v += "      k = i - (LATENCY - 1);\n";
  v += "      if (k >= 0 && k < N) begin\n";
  v += "        if (out_valid !== 1'b1 || out_data !== expv[k]) begin\n";
  v += "          errors = errors + 1;\n";
  v += "          $display(\"MISMATCH vector %0d: got %h expected %h (valid %b)\", k, out_data, expv[k], out_valid);\n";
  v += "        end\n      end\n    end\n";
  v += "    if (errors != 0) begin\n      $fatal(1, \"FAIL: %0d of %0d vectors mismatched\", errors, N);\n    end\n";
  v += "    $display(\"PASS: %0d vectors bit-exact\", N);\n    $finish;\n  end\n\nendmodule\n";
  tb.tb_v = std::move(v);
  return tb;
}

std::vector<std::uint64_t> random_inputs(const IrProgram& p, std::size_t rows, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out(rows * p.n_inputs());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < p.n_inputs(); ++k) {
      const int w = p.input_formats[k].width();
      const std::uint64_t mask = w >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << w) - 1;
      out[r * p.n_inputs() + k] = rng() & mask;
    }
  }
  return out;
}

RtlDesign write_rtl_bundle(const IrProgram& p, const std::string& dir, std::size_t n_vectors,
                           std::uint64_t seed, const RtlOptions& opts) {
  const RtlDesign d = emit_verilog(p, opts);
  const auto in = random_inputs(p, n_vectors, seed);
  const auto out = interpret_batch(p, in);
  const RtlTestbench tb = emit_testbench(p, d, in, out, opts);
  write_file_atomic(dir + "/top.v", d.top_v);
  write_file_atomic(dir + "/tb_top.v", tb.tb_v);
  write_file_atomic(dir + "/stimuli.hex", tb.stimuli_hex);
  write_file_atomic(dir + "/expected.hex", tb.expected_hex);
  write_file_atomic(dir + "/latency.txt", std::to_string(d.latency) + "\n");
  return d;
}

}  // namespace lutforge
