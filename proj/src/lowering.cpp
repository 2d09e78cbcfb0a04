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

#include "lutforge/lowering.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <tuple>

#include "lutforge/error.hpp"

namespace lutforge {

namespace {

// Marker for an exact zero that has not been materialized as a wire.
constexpr int kZero = -1;

class Lowerer {
 public:
  Lowerer(const Model& model, const LowerOptions& opts)
      : model_(model), opts_(opts), b_(input_formats(model), model.n_outputs()) {}

  IrProgram run(std::vector<std::size_t>* sections) {
    std::vector<int> wires(model_.n_inputs());
    for (std::size_t k = 0; k < wires.size(); ++k) wires[k] = b_.input(k);
    mark(sections);
    for (const auto& layer : model_.layers()) {
      switch (layer->kind()) {
        case LayerKind::kLutDense: {
          const auto& l = static_cast<const LutDenseLayer&>(*layer);
          wires = lut_dense(l, wires, l.positions());
          break;
        }
        case LayerKind::kLutConv: {
          const auto& l = static_cast<const LutConvLayer&>(*layer);
          const Im2Col& cols = l.im2col();
          std::vector<int> patches(cols.source.size());
          for (std::size_t k = 0; k < patches.size(); ++k) {
            patches[k] = cols.source[k] < 0 ? kZero : wires[static_cast<std::size_t>(cols.source[k])];
          }
          wires = lut_dense(l.inner, patches, cols.positions);
          break;
        }
        case LayerKind::kQDense:
          wires = qdense(static_cast<const QDenseLayer&>(*layer), wires);
          break;
        case LayerKind::kFlatten:
          break;
      }
      mark(sections);
    }
    for (std::size_t k = 0; k < wires.size(); ++k) b_.output(materialize(wires[k]), k);
    mark(sections);
    IrProgram p = b_.finish();
    if (auto bad = clamp_on_llut_path(p)) {
      throw LoweringError("CLAMP instruction " + std::to_string(*bad) +
                          " lies on an L-LUT path; quantized dense layers adjacent to "
                          "LUT layers must use WRAP activation quantizers");
    }
    return p;
  }

 private:
  static std::vector<FxpFormat> input_formats(const Model& m) {
    const auto& q = m.input_quantizer;
    if (!q.enabled) throw LoweringError("cannot lower a float-mode model (quantizers disabled)");
    if (!q.calibrated) throw LoweringError("cannot lower a model whose input quantizer is uncalibrated");
    std::vector<FxpFormat> f(q.size());
    for (std::size_t k = 0; k < f.size(); ++k) {
      f[k] = q.format(k);
      if (!wire_width_ok(f[k])) {
        throw LoweringError("input " + std::to_string(k) + " has format " + to_string(f[k]) +
                            ", outside the 1..64-bit wire range");
      }
    }
    return f;
  }

  void mark(std::vector<std::size_t>* sections) {
    if (sections == nullptr) return;
    std::size_t before = 0;
    for (auto s : *sections) before += s;
    sections->push_back(b_.program().instrs.size() - before);
  }

  int materialize(int w) {
    if (w != kZero) return w;
    if (zero_ < 0) zero_ = b_.constant(0, FxpFormat{false, 1, 0});
    return zero_;
  }

  int slice(int src, const FxpFormat& fmt) {
    const int s = materialize(src);
    const auto key = std::make_tuple(s, fmt.is_signed, fmt.int_bits, fmt.frac_bits);
    auto it = slices_.find(key);
    if (it != slices_.end()) return it->second;
    const int w = b_.bitslice(s, fmt);
    slices_.emplace(key, w);
    return w;
  }

  // Balanced pairwise reduction, level by level, pairs taken left to right.
  int sum(std::vector<int> terms) {
    if (terms.empty()) return kZero;
    while (terms.size() > 1) {
      std::vector<int> next;
      for (std::size_t k = 0; k + 1 < terms.size(); k += 2) next.push_back(b_.add(terms[k], terms[k + 1]));
      if (terms.size() % 2 == 1) next.push_back(terms.back());
      terms = std::move(next);
    }
    return terms.front();
  }

  std::vector<int> lut_dense(const LutDenseLayer& l, const std::vector<int>& in, std::size_t positions) {
    if (!l.q_in.enabled || !l.q_out.enabled) {
      throw LoweringError("cannot lower a float-mode LUT layer (quantizers disabled)");
    }
    const TableGrid grid = extract_layer(l, opts_.extract);
    const std::size_t ci = l.c_in(), co = l.c_out();
    std::vector<int> table_id(ci * co, -1);
    for (std::size_t e = 0; e < ci * co; ++e) {
      if (grid.tables[e]) table_id[e] = static_cast<int>(b_.add_table(*grid.tables[e]));
    }
    std::vector<int> out(positions * co, kZero);
    for (std::size_t p = 0; p < positions; ++p) {
      std::vector<std::vector<int>> terms(co);
      for (std::size_t j = 0; j < ci; ++j) {
        const int src = in[p * ci + j];
        for (std::size_t i = 0; i < co; ++i) {
          const std::size_t e = l.element(j, i);
          if (table_id[e] < 0) continue;
          const int x = slice(src, grid.tables[e]->in_fmt);
          terms[i].push_back(b_.llut(x, static_cast<std::size_t>(table_id[e])));
        }
      }
      for (std::size_t i = 0; i < co; ++i) out[p * co + i] = sum(std::move(terms[i]));
    }
    return out;
  }

  std::vector<int> qdense(const QDenseLayer& l, const std::vector<int>& in) {
    if (!l.q_w.enabled || !l.q_act.enabled || !l.q_b.enabled) {
      throw LoweringError("cannot lower a float-mode dense layer (quantizers disabled)");
    }
    if (!l.q_w.calibrated || !l.q_act.calibrated || !l.q_b.calibrated) {
      throw LoweringError("cannot lower an uncalibrated dense layer");
    }
    const std::size_t ci = l.c_in(), co = l.c_out();
    const std::size_t positions = in.size() / ci;
    const auto wq = l.quantized_weights();
    const auto bq = l.quantized_bias();
    std::vector<int> out(positions * co, kZero);
    for (std::size_t p = 0; p < positions; ++p) {
      std::vector<int> xq(ci, kZero);
      for (std::size_t j = 0; j < ci; ++j) {
        const FxpFormat f = l.q_act.format(j);
        if (f.width() == 0 || in[p * ci + j] == kZero) continue;
        xq[j] = l.q_act.mode == OverflowMode::kWrap ? slice(in[p * ci + j], f)
                                                    : b_.clamp(in[p * ci + j], f);
      }
      for (std::size_t o = 0; o < co; ++o) {
        std::vector<int> terms;
        for (std::size_t j = 0; j < ci; ++j) {
          const double w = wq[j * co + o];
          if (xq[j] == kZero || w == 0.0) continue;
          const int fw = l.q_w.format(j * co + o).frac_bits;
          terms.push_back(b_.mul_const(xq[j], std::llround(std::ldexp(w, fw)), fw));
        }
        if (bq[o] != 0.0) {
          const int fb = l.q_b.format(o).frac_bits;
          const auto raw = std::llround(std::ldexp(bq[o], fb));
          terms.push_back(b_.constant(raw, covering_format(raw, raw, fb)));
        }
        out[p * co + o] = sum(std::move(terms));
      }
    }
    return out;
  }

  const Model& model_;
  const LowerOptions& opts_;
  IrBuilder b_;
  int zero_ = -1;
  std::map<std::tuple<int, bool, int, int>, int> slices_;
};

}  // namespace

IrProgram lower(const Model& model, const LowerOptions& opts) {
  return Lowerer(model, opts).run(nullptr);
}

std::optional<std::size_t> clamp_on_llut_path(const IrProgram& p) {
  const std::size_t n = p.instrs.size();
  // Forward: does the wire depend on an LLUT? Backward: does an LLUT depend
  // on it?
  std::vector<char> from_llut(n, 0), to_llut(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Instr& in = p.instrs[i];
    from_llut[i] = in.op == Op::kLlut;
    for (int o : {in.a, in.b}) {
      if (o >= 0 && static_cast<std::size_t>(o) < i && from_llut[o]) from_llut[i] = 1;
    }
  }
  for (std::size_t i = n; i-- > 0;) {
    const Instr& in = p.instrs[i];
    const bool feeds = in.op == Op::kLlut || to_llut[i];
    for (int o : {in.a, in.b}) {
      if (feeds && o >= 0 && static_cast<std::size_t>(o) < i) to_llut[o] = 1;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (p.instrs[i].op == Op::kClamp && (from_llut[i] || to_llut[i])) return i;
  }
  return std::nullopt;
}

LowerReport lower_report(const Model& model, const LowerOptions& opts) {
  return lower_report(model, lower(model, opts), opts);
}

LowerReport lower_report(const Model& model, const IrProgram& program, const LowerOptions& opts) {
  std::vector<std::size_t> sections;
  const IrProgram again = Lowerer(model, opts).run(&sections);
  if (!(again == program)) {
    throw LoweringError("program does not match the model it is reported against");
  }
  LowerReport r;
  r.program_length = program.instrs.size();
  r.sections.push_back({"input", sections[0]});
  std::size_t total_lluts = 0, total_pruned = 0;
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    const Layer& layer = *model.layers()[k];
    LayerReport s;
    s.name = "layer" + std::to_string(k) + ":" + std::string(to_string(layer.kind()));
    s.instructions = sections[k + 1];
    s.ebops = ebops_layer(layer, WidthMode::kHard, opts.lut);
    const LutDenseLayer* grid = nullptr;
    if (layer.kind() == LayerKind::kLutDense) grid = &static_cast<const LutDenseLayer&>(layer);
    if (layer.kind() == LayerKind::kLutConv) grid = &static_cast<const LutConvLayer&>(layer).inner;
    if (grid != nullptr) {
      s.lluts = grid->n_lluts();
      for (std::size_t e = 0; e < grid->n_lluts(); ++e) {
        if (grid->pruned(e)) ++s.pruned;
      }
      total_lluts += s.lluts;
      total_pruned += s.pruned;
    }
    r.sections.push_back(s);
  }
  r.sections.push_back({"output", sections.back()});
  // Attribute tables through the LLUT instructions of each section.
  std::size_t start = 0;
  for (auto& s : r.sections) {
    std::vector<char> seen(program.tables.size(), 0);
    for (std::size_t i = start; i < start + s.instructions; ++i) {
      const Instr& in = program.instrs[i];
      if (in.op == Op::kLlut && !seen[in.imm2]) {
        seen[in.imm2] = 1;
        ++s.tables;
        s.table_bits += program.tables[in.imm2].entries.size() *
                        static_cast<std::size_t>(program.tables[in.imm2].out_fmt.width());
      }
    }
    if (s.lluts != 0) s.folded = s.lluts - s.pruned - s.tables;
    start += s.instructions;
    r.ebops += s.ebops;
  }
  r.est_luts = estimate_luts(r.ebops);
  r.pruning_ratio = total_lluts == 0 ? 0.0 : static_cast<double>(total_pruned) / static_cast<double>(total_lluts);
  return r;
}

std::string LowerReport::to_text() const {
  std::string s;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-20s %8s %7s %10s %7s %7s %7s %12s\n", "section", "instrs",
                "tables", "table_bits", "lluts", "pruned", "folded", "ebops");
  s += buf;
  for (const auto& x : sections) {
    std::snprintf(buf, sizeof buf, "%-20s %8zu %7zu %10zu %7zu %7zu %7zu %12.4f\n", x.name.c_str(),
                  x.instructions, x.tables, x.table_bits, x.lluts, x.pruned, x.folded, x.ebops);
    s += buf;
  }
  std::snprintf(buf, sizeof buf,
                "program length %zu, EBOPs %.4f, estimated LUTs %.1f, pruning ratio %.4f\n",
                program_length, ebops, est_luts, pruning_ratio);
  s += buf;
  return s;
}

std::string LowerReport::to_csv() const {
  std::string s = "section,instructions,tables,table_bits,lluts,pruned,folded,ebops\n";
  char buf[256];
  for (const auto& x : sections) {
    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%zu,%zu,%zu,%zu,%.17g\n", x.name.c_str(), x.instructions,
                  x.tables, x.table_bits, x.lluts, x.pruned, x.folded, x.ebops);
    s += buf;
  }
  std::snprintf(buf, sizeof buf, "total,%zu,,,,,,%.17g\n", program_length, ebops);
  s += buf;
  return s;
}

}  // namespace lutforge
