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

#include "lutforge/ir.hpp"

#include <algorithm>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/parallel.hpp"

namespace lutforge {

namespace {

constexpr int kMaxFracSpread = 64;
constexpr std::uint16_t kProgramVersion = 1;

__int128 aligned(std::int64_t raw, int from_f, int to_f) {
  return static_cast<__int128>(raw) << (to_f - from_f);
}

void check_spread(const FxpFormat& a, const FxpFormat& b) {
  if (std::abs(a.frac_bits - b.frac_bits) > kMaxFracSpread) {
    throw IrError("fractional alignment of " + to_string(a) + " and " + to_string(b) +
                  " exceeds 64 bits");
  }
}

bool fits(__int128 raw, const FxpFormat& f) {
  return raw >= f.min_raw() && raw <= f.max_raw();
}

}  // namespace

std::string_view to_string(Op op) {
  switch (op) {
    case Op::kInput: return "INPUT";
    case Op::kConst: return "CONST";
    case Op::kAdd: return "ADD";
    case Op::kSub: return "SUB";
    case Op::kShl: return "SHL";
    case Op::kShr: return "SHR";
    case Op::kBitSlice: return "BITSLICE";
    case Op::kClamp: return "CLAMP";
    case Op::kMulConst: return "MUL_CONST";
    case Op::kLlut: return "LLUT";
    case Op::kOutput: return "OUTPUT";
  }
  return "?";
}

bool wire_width_ok(const FxpFormat& f) {
  const int w = f.width();
  return w >= 1 && w <= (f.is_signed ? 64 : 63);
}

FxpFormat add_format(const FxpFormat& a, const FxpFormat& b) {
  check_spread(a, b);
  const int f = std::max(a.frac_bits, b.frac_bits);
  return covering_format(aligned(a.min_raw(), a.frac_bits, f) + aligned(b.min_raw(), b.frac_bits, f),
                         aligned(a.max_raw(), a.frac_bits, f) + aligned(b.max_raw(), b.frac_bits, f), f);
}

FxpFormat sub_format(const FxpFormat& a, const FxpFormat& b) {
  check_spread(a, b);
  const int f = std::max(a.frac_bits, b.frac_bits);
  return covering_format(aligned(a.min_raw(), a.frac_bits, f) - aligned(b.max_raw(), b.frac_bits, f),
                         aligned(a.max_raw(), a.frac_bits, f) - aligned(b.min_raw(), b.frac_bits, f), f);
}

FxpFormat mul_const_format(const FxpFormat& a, std::int64_t c_raw, int c_frac) {
  const __int128 x = static_cast<__int128>(a.min_raw()) * c_raw;
  const __int128 y = static_cast<__int128>(a.max_raw()) * c_raw;
  return covering_format(std::min(x, y), std::max(x, y), a.frac_bits + c_frac);
}

FxpFormat shift_format(const FxpFormat& a, int k) {
  return FxpFormat{a.is_signed, a.int_bits + k, a.frac_bits - k};
}

namespace {

// Raw value of a requantized to fmt by floor, then wrapped or saturated.
std::int64_t requantize(std::int64_t raw, const FxpFormat& from, const FxpFormat& to, bool saturate) {
  const int d = to.frac_bits - from.frac_bits;
  if (!saturate) {
    std::uint64_t bits = 0;
    if (d >= 0) {
      bits = d >= 64 ? 0 : static_cast<std::uint64_t>(raw) << d;
    } else {
      bits = static_cast<std::uint64_t>(-d >= 64 ? (raw < 0 ? -1 : 0) : (raw >> -d));
    }
    return raw_from_bits(bits, to);
  }
  __int128 r = 0;
  if (d >= 0) {
    if (raw != 0 && d > 64) {
      return raw < 0 ? to.min_raw() : to.max_raw();
    }
    r = static_cast<__int128>(raw) << d;
  } else {
    r = -d >= 64 ? (raw < 0 ? -1 : 0) : (raw >> -d);
  }
  return static_cast<std::int64_t>(std::clamp<__int128>(r, to.min_raw(), to.max_raw()));
}

}  // namespace

IrBuilder::IrBuilder(std::vector<FxpFormat> input_formats, std::size_t n_outputs) {
  prog_.input_formats = std::move(input_formats);
  prog_.output_formats.assign(n_outputs, FxpFormat{});
}

int IrBuilder::push(Instr in) {
  prog_.instrs.push_back(in);
  return static_cast<int>(prog_.instrs.size() - 1);
}

int IrBuilder::input(std::size_t port) {
  return push({Op::kInput, prog_.input_formats.at(port), -1, -1, static_cast<std::int32_t>(port), 0});
}

int IrBuilder::constant(std::int64_t raw, const FxpFormat& fmt) {
  return push({Op::kConst, fmt, -1, -1, 0, raw});
}

int IrBuilder::add(int a, int b) {
  return push({Op::kAdd, add_format(format(a), format(b)), a, b, 0, 0});
}

int IrBuilder::sub(int a, int b) {
  return push({Op::kSub, sub_format(format(a), format(b)), a, b, 0, 0});
}

int IrBuilder::shl(int a, int k) {
  return push({Op::kShl, shift_format(format(a), k), a, -1, k, 0});
}

int IrBuilder::shr(int a, int k) {
  return push({Op::kShr, shift_format(format(a), -k), a, -1, k, 0});
}

int IrBuilder::bitslice(int a, const FxpFormat& fmt) {
  return push({Op::kBitSlice, fmt, a, -1, 0, 0});
}

int IrBuilder::clamp(int a, const FxpFormat& fmt) {
  return push({Op::kClamp, fmt, a, -1, 0, 0});
}

int IrBuilder::mul_const(int a, std::int64_t c_raw, int c_frac) {
  return push({Op::kMulConst, mul_const_format(format(a), c_raw, c_frac), a, -1, c_frac, c_raw});
}

int IrBuilder::llut(int a, std::size_t table_id) {
  return push({Op::kLlut, prog_.tables.at(table_id).out_fmt, a, -1,
               static_cast<std::int32_t>(table_id), 0});
}

void IrBuilder::output(int a, std::size_t port) {
  prog_.output_formats.at(port) = format(a);
  push({Op::kOutput, format(a), a, -1, static_cast<std::int32_t>(port), 0});
}

std::size_t IrBuilder::add_table(TruthTable t) {
  prog_.tables.push_back(std::move(t));
  return prog_.tables.size() - 1;
}

IrProgram IrBuilder::finish() {
  const auto diags = validate(prog_);
  if (!diags.empty()) throw IrError("invalid program:\n" + format_diagnostics(diags));
  return std::move(prog_);
}

std::vector<Diagnostic> validate(const IrProgram& p) {
  std::vector<Diagnostic> out;
  auto diag = [&](std::size_t i, std::string msg) { out.push_back({i, std::move(msg)}); };
  for (std::size_t k = 0; k < p.input_formats.size(); ++k) {
    if (!wire_width_ok(p.input_formats[k])) {
      diag(0, "input " + std::to_string(k) + " format " + to_string(p.input_formats[k]) +
                  " is not 1..64 bits wide");
    }
  }
  for (std::size_t t = 0; t < p.tables.size(); ++t) {
    const auto& tab = p.tables[t];
    const int m = tab.in_fmt.width();
    if (m < 1 || m > 30 || !wire_width_ok(tab.out_fmt)) {
      diag(0, "table " + std::to_string(t) + " has unsupported widths");
      continue;
    }
    if (tab.entries.size() != (std::size_t{1} << m)) {
      diag(0, "table " + std::to_string(t) + " has " + std::to_string(tab.entries.size()) +
                  " entries, expected 2^" + std::to_string(m));
    }
    const int n = tab.out_fmt.width();
    for (auto v : tab.entries) {
      if (n < 64 && (v >> n) != 0) {
        diag(0, "table " + std::to_string(t) + " has an entry wider than " + std::to_string(n) + " bits");
        break;
      }
    }
  }

  std::vector<int> port_seen(p.output_formats.size(), 0);
  std::vector<int> input_seen(p.input_formats.size(), 0);
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instr& in = p.instrs[i];
    auto operand = [&](std::int32_t w, const char* name) -> const Instr* {
      if (w < 0 || static_cast<std::size_t>(w) >= p.instrs.size()) {
        diag(i, std::string("operand ") + name + "=" + std::to_string(w) + " does not exist");
        return nullptr;
      }
      if (static_cast<std::size_t>(w) >= i) {
        diag(i, std::string("operand ") + name + " of instruction " + std::to_string(i) +
                    " uses wire " + std::to_string(w) +
                    ", which is defined later at instruction " + std::to_string(w));
        return nullptr;
      }
      if (p.instrs[w].op == Op::kOutput) {
        diag(i, std::string("operand ") + name + " refers to OUTPUT instruction " + std::to_string(w));
        return nullptr;
      }
      return &p.instrs[w];
    };
    auto expect_fmt = [&](const FxpFormat& want) {
      if (!(in.fmt == want)) {
        diag(i, std::string(to_string(in.op)) + " result format " + to_string(in.fmt) +
                    " differs from the rule format " + to_string(want));
      }
    };
    if (in.op != Op::kOutput && !wire_width_ok(in.fmt)) {
      diag(i, std::string(to_string(in.op)) + " result " + to_string(in.fmt) +
                  " is not 1..64 bits wide (interpreter limit)");
      continue;
    }
    try {
      switch (in.op) {
        case Op::kInput:
          if (in.imm2 < 0 || static_cast<std::size_t>(in.imm2) >= p.input_formats.size()) {
            diag(i, "INPUT port " + std::to_string(in.imm2) + " out of range");
          } else {
            if (input_seen[in.imm2]++ != 0) diag(i, "INPUT port " + std::to_string(in.imm2) + " read twice");
            expect_fmt(p.input_formats[in.imm2]);
          }
          break;
        case Op::kConst:
          if (!fits(in.imm, in.fmt)) diag(i, "CONST value does not fit " + to_string(in.fmt));
          break;
        case Op::kAdd:
        case Op::kSub: {
          const Instr* a = operand(in.a, "a");
          const Instr* b = operand(in.b, "b");
          if (a && b) expect_fmt(in.op == Op::kAdd ? add_format(a->fmt, b->fmt) : sub_format(a->fmt, b->fmt));
          break;
        }
        case Op::kShl:
        case Op::kShr:
          if (const Instr* a = operand(in.a, "a")) {
            if (in.imm2 < 0 || in.imm2 > 64) diag(i, "shift amount out of range");
            expect_fmt(shift_format(a->fmt, in.op == Op::kShl ? in.imm2 : -in.imm2));
          }
          break;
        case Op::kBitSlice:
        case Op::kClamp:
          operand(in.a, "a");
          break;
        case Op::kMulConst:
          if (const Instr* a = operand(in.a, "a")) expect_fmt(mul_const_format(a->fmt, in.imm, in.imm2));
          break;
        case Op::kLlut: {
          const Instr* a = operand(in.a, "a");
          if (in.imm2 < 0 || static_cast<std::size_t>(in.imm2) >= p.tables.size()) {
            diag(i, "unknown table " + std::to_string(in.imm2));
            break;
          }
          const auto& tab = p.tables[in.imm2];
          if (a && !(a->fmt == tab.in_fmt)) {
            diag(i, "LLUT operand format " + to_string(a->fmt) + " differs from table input " +
                        to_string(tab.in_fmt));
          }
          expect_fmt(tab.out_fmt);
          break;
        }
        case Op::kOutput: {
          const Instr* a = operand(in.a, "a");
          if (in.imm2 < 0 || static_cast<std::size_t>(in.imm2) >= p.output_formats.size()) {
            diag(i, "OUTPUT port " + std::to_string(in.imm2) + " out of range");
            break;
          }
          if (port_seen[in.imm2]++ != 0) diag(i, "OUTPUT port " + std::to_string(in.imm2) + " assigned twice");
          if (a && !(a->fmt == p.output_formats[in.imm2] && in.fmt == a->fmt)) {
            diag(i, "OUTPUT format does not match port " + std::to_string(in.imm2));
          }
          break;
        }
        default:
          diag(i, "unknown opcode " + std::to_string(static_cast<int>(in.op)));
      }
    } catch (const IrError& e) {
      diag(i, e.what());
    }
  }
  for (std::size_t k = 0; k < port_seen.size(); ++k) {
    if (port_seen[k] == 0) diag(p.instrs.size(), "output port " + std::to_string(k) + " is never assigned");
  }
  return out;
}

std::string format_diagnostics(const std::vector<Diagnostic>& d) {
  std::string s;
  for (const auto& x : d) s += "  instr " + std::to_string(x.instr) + ": " + x.message + "\n";
  return s;
}

namespace {

void run(const IrProgram& p, std::span<const std::uint64_t> inputs, std::vector<std::int64_t>& val,
         std::span<std::uint64_t> outputs) {
  if (inputs.size() != p.n_inputs()) {
    throw IrError("expected " + std::to_string(p.n_inputs()) + " inputs, got " +
                  std::to_string(inputs.size()));
  }
  val.resize(p.instrs.size());
  for (std::size_t i = 0; i < p.instrs.size(); ++i) {
    const Instr& in = p.instrs[i];
    __int128 r = 0;
    switch (in.op) {
      case Op::kInput: {
        const FxpFormat& f = p.input_formats[in.imm2];
        const std::uint64_t bits = inputs[in.imm2];
        if (f.width() < 64 && (bits >> f.width()) != 0) {
          throw IrError("input " + std::to_string(in.imm2) + " pattern does not fit " + to_string(f));
        }
        r = raw_from_bits(bits, f);
        break;
      }
      case Op::kConst:
        r = in.imm;
        break;
      case Op::kAdd:
      case Op::kSub: {
        const FxpFormat& fa = p.instrs[in.a].fmt;
        const FxpFormat& fb = p.instrs[in.b].fmt;
        const __int128 x = aligned(val[in.a], fa.frac_bits, in.fmt.frac_bits);
        const __int128 y = aligned(val[in.b], fb.frac_bits, in.fmt.frac_bits);
        r = in.op == Op::kAdd ? x + y : x - y;
        break;
      }
      case Op::kShl:
      case Op::kShr:
        r = val[in.a];
        break;
      case Op::kBitSlice:
      case Op::kClamp:
        r = requantize(val[in.a], p.instrs[in.a].fmt, in.fmt, in.op == Op::kClamp);
        break;
      case Op::kMulConst:
        r = static_cast<__int128>(val[in.a]) * in.imm;
        break;
      case Op::kLlut: {
        const TruthTable& t = p.tables[in.imm2];
        const std::uint64_t idx = bits_from_raw(val[in.a], t.in_fmt);
        r = raw_from_bits(t.entries[idx], t.out_fmt);
        break;
      }
      case Op::kOutput:
        outputs[in.imm2] = bits_from_raw(val[in.a], in.fmt);
        r = val[in.a];
        break;
    }
    if (!fits(r, in.fmt)) {
      throw IrError("overflow fault at instruction " + std::to_string(i) + " (" +
                    std::string(to_string(in.op)) + "): result does not fit " + to_string(in.fmt));
    }
    val[i] = static_cast<std::int64_t>(r);
  }
}

void require_valid(const IrProgram& p) {
  const auto diags = validate(p);
  if (!diags.empty()) throw IrError("invalid program:\n" + format_diagnostics(diags));
}

}  // namespace

std::vector<std::uint64_t> interpret(const IrProgram& p, std::span<const std::uint64_t> inputs) {
  require_valid(p);
  std::vector<std::int64_t> val;
  std::vector<std::uint64_t> out(p.n_outputs(), 0);
  run(p, inputs, val, out);
  return out;
}

std::vector<std::uint64_t> interpret_batch(const IrProgram& p, std::span<const std::uint64_t> inputs) {
  const std::size_t ni = p.n_inputs();
  const std::size_t no = p.n_outputs();
  if (ni == 0 ? !inputs.empty() : inputs.size() % ni != 0) {
    throw IrError("batch size is not a multiple of the input count");
  }
  require_valid(p);
  const std::size_t rows = ni == 0 ? 0 : inputs.size() / ni;
  std::vector<std::uint64_t> out(rows * no, 0);
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int64_t> val;
    for (std::size_t r = begin; r < end; ++r) {
      try {
        run(p, inputs.subspan(r * ni, ni), val, std::span(out).subspan(r * no, no));
      } catch (const IrError& e) {
        throw IrError("sample " + std::to_string(r) + ": " + e.what());
      }
    }
  });
  return out;
}

namespace {

void put_fmt(ByteWriter& w, const FxpFormat& f) {
  w.u8(f.is_signed ? 1 : 0);
  w.i32(f.int_bits);
  w.i32(f.frac_bits);
}

FxpFormat get_fmt(ByteReader& r) {
  FxpFormat f;
  f.is_signed = r.u8() != 0;
  f.int_bits = r.i32();
  f.frac_bits = r.i32();
  return f;
}

}  // namespace

std::string program_to_bytes(const IrProgram& p) {
  ByteWriter w;
  w.bytes("LFIR");
  w.u16(kProgramVersion);
  w.u32(static_cast<std::uint32_t>(p.n_inputs()));
  w.u32(static_cast<std::uint32_t>(p.n_outputs()));
  for (const auto& f : p.input_formats) put_fmt(w, f);
  for (const auto& f : p.output_formats) put_fmt(w, f);
  w.u32(static_cast<std::uint32_t>(p.instrs.size()));
  for (const auto& in : p.instrs) {
    w.u8(static_cast<std::uint8_t>(in.op));
    w.u8(in.fmt.is_signed ? 1 : 0);
    w.u16(0);
    w.i32(in.fmt.int_bits);
    w.i32(in.fmt.frac_bits);
    w.i32(in.a);
    w.i32(in.b);
    w.i32(in.imm2);
    w.i64(in.imm);
  }
  w.u32(static_cast<std::uint32_t>(p.tables.size()));
  for (const auto& t : p.tables) {
    put_fmt(w, t.in_fmt);
    put_fmt(w, t.out_fmt);
    w.u32(static_cast<std::uint32_t>(t.entries.size()));
    for (auto e : t.entries) w.u64(e);
  }
  return w.str();
}

IrProgram program_from_bytes(const std::string& bytes) {
  ByteReader r(bytes, "program");
  if (r.bytes(4) != "LFIR") throw DataError("program: bad magic (expected LFIR)");
  const auto version = r.u16();
  if (version != kProgramVersion) throw DataError("program: unsupported version " + std::to_string(version));
  IrProgram p;
  const std::uint32_t ni = r.u32();
  const std::uint32_t no = r.u32();
  if (static_cast<std::size_t>(ni + no) * 9 > bytes.size()) throw DataError("program: header counts exceed file size");
  for (std::uint32_t k = 0; k < ni; ++k) p.input_formats.push_back(get_fmt(r));
  for (std::uint32_t k = 0; k < no; ++k) p.output_formats.push_back(get_fmt(r));
  const std::uint32_t n_instr = r.u32();
  if (static_cast<std::size_t>(n_instr) * 32 > bytes.size()) throw DataError("program: instruction count exceeds file size");
  p.instrs.resize(n_instr);
  for (auto& in : p.instrs) {
    const std::uint8_t op = r.u8();
    if (op > static_cast<std::uint8_t>(Op::kOutput)) throw DataError("program: unknown opcode " + std::to_string(op));
    in.op = static_cast<Op>(op);
    in.fmt.is_signed = r.u8() != 0;
    r.u16();
    in.fmt.int_bits = r.i32();
    in.fmt.frac_bits = r.i32();
    in.a = r.i32();
    in.b = r.i32();
    in.imm2 = r.i32();
    in.imm = r.i64();
  }
  const std::uint32_t n_tab = r.u32();
  for (std::uint32_t k = 0; k < n_tab; ++k) {
    TruthTable t;
    t.in_fmt = get_fmt(r);
    t.out_fmt = get_fmt(r);
    const std::uint32_t len = r.u32();
    if (static_cast<std::size_t>(len) * 8 > bytes.size()) throw DataError("program: table length exceeds file size");
    t.entries.resize(len);
    for (auto& e : t.entries) e = r.u64();
    p.tables.push_back(std::move(t));
  }
  if (!r.done()) throw DataError("program: trailing bytes");
  return p;
}

void save_program(const std::string& path, const IrProgram& p) {
  write_file_atomic(path, program_to_bytes(p));
}

IrProgram load_program(const std::string& path) {
  return program_from_bytes(read_file(path));
}

ProgramStats program_stats(const IrProgram& p) {
  ProgramStats s;
  for (const auto& in : p.instrs) ++s.per_op[static_cast<int>(in.op)];
  s.tables = p.tables.size();
  for (const auto& t : p.tables) {
    s.table_entries += t.entries.size();
    s.table_bits += t.entries.size() * static_cast<std::size_t>(t.out_fmt.width());
  }
  return s;
}

}  // namespace lutforge
