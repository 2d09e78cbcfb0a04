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


#include <chrono>
#include <random>

#include <doctest.h>

#include "lutforge/error.hpp"
#include "lutforge/ir.hpp"
#include "lutforge/table.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;

namespace {

void set_fmt(QuantizerState& q, std::size_t e, int i, int f, bool sgn) {
  q.i_cal[e] = i;
  q.f_raw[e] = f;
  q.is_signed[e] = sgn;
  q.calibrated = true;
}

// One-L-LUT layer realizing x^2 on {0, 1, 2, 3} with three ReLU units.
LutDenseLayer square_layer() {
  LutDenseOptions o;
  o.hidden = 3;
  o.activation = Activation::kRelu;
  LutDenseLayer l({1}, 1, o);
  l.w0 = {1, 1, 1};
  l.b0 = {0, -1, -2};
  l.w1 = {1, 2, 2};
  l.b1 = {0};
  set_fmt(l.q_in, 0, 2, 0, false);
  set_fmt(l.q_out, 0, 4, 0, false);
  return l;
}

TruthTable square_table() {
  return {FxpFormat{false, 2, 0}, FxpFormat{false, 4, 0}, {0, 1, 4, 9}};
}

}  // namespace

TEST_CASE("x squared table") {
  TableGrid g = extract_layer(square_layer());
  REQUIRE(g.at(0, 0).has_value());
  CHECK(*g.at(0, 0) == square_table());
  CHECK(g.at(0, 0)->m() == 2);
  CHECK(g.at(0, 0)->n() == 4);
}

TEST_CASE("tables match a single-input eval forward exhaustively") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 6; ++trial) {
    LutDenseOptions o;
    o.use_batchnorm = trial % 2 == 1;
    o.hidden = 1 + trial % 3;
    LutDenseLayer l({3}, 3, o, rng);
    randomize(l, rng, 2.0);
    for (int k = 0; k < 3; ++k) l.forward_train(random_tensor({64, 3}, rng, -4, 4));
    std::uniform_int_distribution<int> fb(-1, 4);
    for (std::size_t e = 0; e < l.n_lluts(); ++e) {
      l.q_in.f_raw[e] = fb(rng);
      l.q_out.f_raw[e] = fb(rng) + 1;
    }
    const TableGrid g = extract_layer(l);
    const auto folded = l.folded_output();
    for (std::size_t j = 0; j < 3; ++j) {
      for (std::size_t i = 0; i < 3; ++i) {
        const std::size_t e = l.element(j, i);
        const FxpFormat in = l.q_in.format(e), out = l.q_out.format(e);
        if (in.width() == 0 || out.width() == 0) {
          CHECK_FALSE(g.at(j, i).has_value());
          continue;
        }
        REQUIRE(in.width() <= 8);
        // Single-L-LUT copy evaluated through the ordinary eval path.
        LutDenseLayer one({1}, 1, LutDenseOptions{o.hidden, o.activation, false, 0});
        for (std::size_t k = 0; k < o.hidden; ++k) {
          one.w0[k] = l.w0[e * o.hidden + k];
          one.b0[k] = l.b0[e * o.hidden + k];
          one.w1[k] = folded.w1[e * o.hidden + k];
        }
        one.b1[0] = folded.b1[e];
        set_fmt(one.q_in, 0, l.q_in.i_cal[e], static_cast<int>(l.q_in.f_raw[e]), l.q_in.is_signed[e]);
        set_fmt(one.q_out, 0, l.q_out.i_cal[e], static_cast<int>(l.q_out.f_raw[e]), l.q_out.is_signed[e]);
        const std::size_t len = std::size_t{1} << in.width();
        Tensor x({len, 1});
        for (std::size_t k = 0; k < len; ++k) x.data[k] = from_bits(k, in);
        const Tensor y = one.forward_eval(x);
        bool all_zero = true;
        for (std::size_t k = 0; k < len; ++k) all_zero = all_zero && y.data[k] == 0.0;
        if (all_zero) {
          CHECK_FALSE(g.at(j, i).has_value());
          continue;
        }
        REQUIRE(g.at(j, i).has_value());
        const TruthTable& t = *g.at(j, i);
        REQUIRE(t.entries.size() == len);
        for (std::size_t k = 0; k < len; ++k) {
          CHECK(from_bits(t.entries[k], out) == y.data[k]);
          CHECK(t.entries[k] < (std::uint64_t{1} << out.width()));
        }
      }
    }
  }
}

TEST_CASE("zero MLP folds away and guards fire") {
  LutDenseLayer l = square_layer();
  l.w1 = {0, 0, 0};
  CHECK_FALSE(extract_layer(l).at(0, 0).has_value());

  LutDenseLayer wide = square_layer();
  set_fmt(wide.q_in, 0, 10, 8, false);
  CHECK_THROWS_AS(extract_layer(wide), ExtractionError);
  ExtractOptions big;
  big.max_table_bits = 18;
  CHECK_NOTHROW(extract_layer(wide, big));

  LutDenseLayer flt = square_layer();
  flt.set_quantizers_enabled(false);
  CHECK_THROWS_AS(extract_layer(flt), ExtractionError);

  LutDenseLayer raw({1}, 1, {});
  CHECK_THROWS_AS(extract_layer(raw), ExtractionError);
}

TEST_CASE("32x32 layer with 8-bit inputs extracts quickly") {
  std::mt19937_64 rng(2);
  LutDenseLayer l({32}, 32, {}, rng);
  for (std::size_t e = 0; e < l.n_lluts(); ++e) {
    set_fmt(l.q_in, e, 3, 4, true);
    set_fmt(l.q_out, e, 2, 4, true);
  }
  const auto t0 = std::chrono::steady_clock::now();
  const TableGrid g = extract_layer(l);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(s < 1.0);
  CHECK(g.tables.size() == 1024);
}

TEST_CASE("validate examples") {
  IrProgram empty;
  CHECK(validate(empty).empty());

  IrProgram missing;
  missing.input_formats = {FxpFormat{false, 2, 0}};
  missing.output_formats = {FxpFormat{false, 4, 0}};
  missing.instrs = {{Op::kInput, FxpFormat{false, 2, 0}, -1, -1, 0, 0},
                    {Op::kLlut, FxpFormat{false, 4, 0}, 0, -1, 0, 0},
                    {Op::kOutput, FxpFormat{false, 4, 0}, 1, -1, 0, 0}};
  auto d = validate(missing);
  REQUIRE(d.size() == 1);
  CHECK(d[0].instr == 1);
  CHECK(d[0].message.find("unknown table") != std::string::npos);

  IrProgram early = missing;
  early.tables = {square_table()};
  early.instrs[1].a = 2;
  d = validate(early);
  REQUIRE_FALSE(d.empty());
  CHECK(d[0].instr == 1);
  CHECK(d[0].message.find("instruction 1") != std::string::npos);
  CHECK(d[0].message.find("wire 2") != std::string::npos);

  IrProgram twice = missing;
  twice.tables = {square_table()};
  twice.instrs.push_back(twice.instrs[2]);
  d = validate(twice);
  REQUIRE(d.size() == 1);
  CHECK(d[0].message.find("assigned twice") != std::string::npos);

  IrProgram never = missing;
  never.tables = {square_table()};
  never.instrs.pop_back();
  CHECK(validate(never).size() == 1);
  CHECK_THROWS_AS(interpret(never, std::vector<std::uint64_t>{0}), IrError);
}

TEST_CASE("interpret examples") {
  const FxpFormat i4{false, 4, 0};
  IrBuilder b({}, 1);
  const int x = b.constant(3, i4);
  const int y = b.constant(5, i4);
  b.output(b.add(x, y), 0);
  IrProgram p = b.finish();
  const auto out = interpret(p, std::vector<std::uint64_t>{});
  CHECK(from_bits(out[0], p.output_formats[0]) == 8.0);

  IrBuilder lb({FxpFormat{false, 2, 0}}, 1);
  const std::size_t t = lb.add_table(square_table());
  lb.output(lb.llut(lb.input(0), t), 0);
  IrProgram lp = lb.finish();
  CHECK(interpret(lp, std::vector<std::uint64_t>{3})[0] == 9u);

  const FxpFormat s4{true, 2, 1};
  IrBuilder sb({FxpFormat{false, 4, 0}}, 1);
  sb.output(sb.bitslice(sb.input(0), FxpFormat{true, 3, 0}), 0);
  IrProgram sp = sb.finish();
  const auto sliced = interpret(sp, std::vector<std::uint64_t>{8});
  CHECK(from_bits(sliced[0], sp.output_formats[0]) == -8.0);

  IrBuilder cb({FxpFormat{true, 6, 2}}, 1);
  cb.output(cb.clamp(cb.input(0), s4), 0);
  IrProgram cp = cb.finish();
  CHECK(from_bits(interpret(cp, std::vector<std::uint64_t>{to_bits(17.25, cp.input_formats[0])})[0], s4) == 3.5);
  CHECK(from_bits(interpret(cp, std::vector<std::uint64_t>{to_bits(-9.0, cp.input_formats[0])})[0], s4) == -4.0);
  CHECK(from_bits(interpret(cp, std::vector<std::uint64_t>{to_bits(1.75, cp.input_formats[0])})[0], s4) == 1.5);
}

TEST_CASE("arithmetic matches double evaluation") {
  const FxpFormat fa{true, 3, 2}, fb{false, 2, 3};
  IrBuilder b({fa, fb}, 4);
  const int x = b.input(0), y = b.input(1);
  b.output(b.add(x, y), 0);
  b.output(b.sub(x, y), 1);
  b.output(b.mul_const(x, -5, 2), 2);
  b.output(b.shr(b.add(b.shl(x, 1), y), 3), 3);
  IrProgram p = b.finish();
  for (std::uint64_t bx = 0; bx < (1u << fa.width()); ++bx) {
    for (std::uint64_t by = 0; by < (1u << fb.width()); ++by) {
      const double vx = from_bits(bx, fa), vy = from_bits(by, fb);
      const auto o = interpret(p, std::vector<std::uint64_t>{bx, by});
      CHECK(from_bits(o[0], p.output_formats[0]) == vx + vy);
      CHECK(from_bits(o[1], p.output_formats[1]) == vx - vy);
      CHECK(from_bits(o[2], p.output_formats[2]) == vx * -1.25);
      CHECK(from_bits(o[3], p.output_formats[3]) == (2 * vx + vy) / 8);
    }
  }
}

TEST_CASE("wires wider than 64 bits are rejected") {
  const FxpFormat big{true, 40, 23};
  IrBuilder b({big, big}, 1);
  b.output(b.add(b.input(0), b.input(1)), 0);
  CHECK_THROWS_AS(b.finish(), IrError);
}

TEST_CASE("interpret_batch agrees with per-sample interpret") {
  std::mt19937_64 rng(4);
  const FxpFormat f{true, 3, 3};
  IrBuilder b({f, f, f}, 2);
  const std::size_t t =
      b.add_table({FxpFormat{true, 1, 2}, FxpFormat{true, 2, 1}, [&] {
                     std::vector<std::uint64_t> e(16);
                     for (auto& v : e) v = rng() % 16;
                     return e;
                   }()});
  const int s = b.bitslice(b.input(0), FxpFormat{true, 1, 2});
  const int l = b.llut(s, t);
  b.output(b.add(l, b.input(1)), 0);
  b.output(b.sub(b.input(2), l), 1);
  IrProgram p = b.finish();

  std::vector<std::uint64_t> in(3 * 10000);
  for (auto& v : in) v = rng() % 128;
  const auto batch = interpret_batch(p, in);
  for (std::size_t r = 0; r < 10000; ++r) {
    const auto one = interpret(p, std::span(in).subspan(r * 3, 3));
    CHECK(batch[r * 2] == one[0]);
    CHECK(batch[r * 2 + 1] == one[1]);
  }
  CHECK(interpret_batch(p, std::vector<std::uint64_t>{}).empty());
  CHECK(interpret_batch(p, std::span(in).first(3)) == interpret(p, std::span(in).first(3)));

  in[3 * 17] = 1u << 20;
  try {
    interpret_batch(p, in);
    FAIL("expected a fault");
  } catch (const IrError& e) {
    CHECK(std::string(e.what()).starts_with("sample 17:"));
  }
}

TEST_CASE("LFIR round trip") {
  const FxpFormat f{true, 3, 3};
  IrBuilder b({f, FxpFormat{false, 2, 0}}, 2);
  const std::size_t t = b.add_table(square_table());
  b.output(b.llut(b.input(1), t), 0);
  b.output(b.mul_const(b.input(0), 7, 3), 1);
  IrProgram p = b.finish();
  const std::string bytes = program_to_bytes(p);
  CHECK(bytes.substr(0, 4) == "LFIR");
  IrProgram q = program_from_bytes(bytes);
  CHECK(q == p);
  CHECK(program_to_bytes(q) == bytes);
  CHECK_THROWS(program_from_bytes(bytes.substr(0, bytes.size() - 3)));
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS(program_from_bytes(bad));
}
