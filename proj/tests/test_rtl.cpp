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


#include <filesystem>
#include <random>
#include <regex>

#include <doctest.h>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/lowering.hpp"
#include "lutforge/rtl.hpp"
#include "sim_util.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;
namespace fs = std::filesystem;

namespace {

IrProgram square_program() {
  TruthTable t;
  t.in_fmt = FxpFormat{false, 2, 0};
  t.out_fmt = FxpFormat{false, 4, 0};
  t.entries = {0, 1, 4, 9};
  IrBuilder b({t.in_fmt}, 1);
  const std::size_t id = b.add_table(t);
  b.output(b.llut(b.input(0), id), 0);
  return b.finish();
}

Model dense_bn_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m({6});
  LutDenseOptions bn;
  bn.use_batchnorm = true;
  randomize(m.add_lut_dense(5, bn, rng), rng, 1.5);
  randomize(m.add_lut_dense(3, {}, rng), rng, 1.5);
  warm_up(m, rng);
  return m;
}

Model conv_hybrid_model(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Model m({5, 2});
  ConvOptions c;
  c.kernel = {3};
  c.stride = {1};
  m.add_lut_conv(2, c, {}, rng);
  m.add_flatten();
  QDenseOptions wrap;
  wrap.act_mode = OverflowMode::kWrap;
  m.add_qdense(3, wrap, rng);
  m.add_lut_dense(2, {}, rng);
  warm_up(m, rng);
  return m;
}

std::size_t count(const std::string& s, const std::regex& re) {
  return static_cast<std::size_t>(
      std::distance(std::sregex_iterator(s.begin(), s.end(), re), std::sregex_iterator()));
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("lutforge_rtl_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("emission is deterministic") {
  const IrProgram p = lower(dense_bn_model(1));
  const RtlDesign a = emit_verilog(p);
  const RtlDesign b = emit_verilog(program_from_bytes(program_to_bytes(p)));
  CHECK(a.top_v == b.top_v);
  const auto in = random_inputs(p, 50, 3);
  CHECK(in == random_inputs(p, 50, 3));
  const auto out = interpret_batch(p, in);
  CHECK(emit_testbench(p, a, in, out).tb_v == emit_testbench(p, b, in, out).tb_v);
}

TEST_CASE("a four entry table becomes a four arm case") {
  const IrProgram p = square_program();
  const RtlDesign d = emit_verilog(p);
  CHECK(count(d.top_v, std::regex("case \\(x\\)")) == 1);
  CHECK(count(d.top_v, std::regex("2'h[0-3]: llut0 = 4'h[0-9a-f];")) == 4);
  CHECK(d.top_v.find("2'h3: llut0 = 4'h9;") != std::string::npos);
  CHECK(d.in_width == 2);
  CHECK(d.out_width == 4);
}

TEST_CASE("empty program emits") {
  IrBuilder b({}, 0);
  const IrProgram p = b.finish();
  const RtlDesign d = emit_verilog(p);
  CHECK(d.top_v.find("module top") != std::string::npos);
  CHECK(d.latency == 2);
  const RtlTestbench tb = emit_testbench(p, d, {}, {});
  CHECK(tb.stimuli_hex.empty());
  CHECK(tb.tb_v.find("localparam integer N = 0;") != std::string::npos);
}

TEST_CASE("latency counts the pipeline stages plus input and output registers") {
  const IrProgram p = lower(conv_hybrid_model(2));
  int prev_stages = -1;
  for (int depth : {0, 1, 2, 4, 8}) {
    RtlOptions o;
    o.stage_depth = depth;
    const RtlDesign d = emit_verilog(p, o);
    CHECK(d.latency == 1 + d.stages + 1);
    if (depth == 0) CHECK(d.stages == 0);
    if (depth == 1) CHECK(d.stages > 0);
    if (prev_stages >= 0 && depth > 1) CHECK(d.stages <= prev_stages);
    if (depth >= 1) prev_stages = d.stages;
  }
}

TEST_CASE("testbench hex files hold one packed line per vector") {
  const IrProgram p = lower(dense_bn_model(3));
  const RtlDesign d = emit_verilog(p);
  const auto in = random_inputs(p, 25, 9);
  for (std::size_t k = 0; k < in.size(); ++k) {
    CHECK(in[k] < (std::uint64_t{1} << p.input_formats[k % p.n_inputs()].width()));
  }
  const auto out = interpret_batch(p, in);
  const RtlTestbench tb = emit_testbench(p, d, in, out);
  CHECK(count(tb.stimuli_hex, std::regex("\n")) == 25);
  CHECK(count(tb.expected_hex, std::regex("\n")) == 25);
  const std::size_t line = tb.stimuli_hex.find('\n');
  CHECK(line == static_cast<std::size_t>((d.in_width + 3) / 4));
  CHECK_THROWS_AS(emit_testbench(p, d, in, std::vector<std::uint64_t>(out.begin(), out.end() - 1)),
                  UsageError);
}

TEST_CASE("invalid programs are not emitted") {
  IrProgram p = square_program();
  p.instrs[1].a = 5;
  CHECK_THROWS_AS(emit_verilog(p), IrError);
}

TEST_CASE("bundle writes every file") {
  const fs::path dir = fresh_dir("bundle");
  const RtlDesign d = write_rtl_bundle(square_program(), dir.string(), 4, 1);
  for (const char* f : {"top.v", "tb_top.v", "stimuli.hex", "expected.hex", "latency.txt"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(read_file((dir / "latency.txt").string()) == std::to_string(d.latency) + "\n");
  fs::remove_all(dir);
}

TEST_CASE("Verilator testbenches agree with the interpreter") {
  const auto sim = find_verilator();
  if (!sim) {
    MESSAGE("SKIP: no Verilator on PATH");
    return;
  }
  struct Case {
    std::string name;
    IrProgram program;
    int stage_depth;
    std::size_t vectors;
  };
  std::vector<Case> cases;
  cases.push_back({"dense", lower(dense_bn_model(11)), 4, 2000});
  cases.push_back({"hybrid", lower(conv_hybrid_model(12)), 0, 2000});
  cases.push_back({"novectors", square_program(), 2, 0});
  for (const auto& c : cases) {
    CAPTURE(c.name);
    const fs::path dir = fresh_dir(c.name);
    RtlOptions o;
    o.stage_depth = c.stage_depth;
    write_rtl_bundle(c.program, dir.string(), c.vectors, 5, o);
    const SimRun run = build_and_run_testbench(*sim, dir);
    REQUIRE_MESSAGE(run.built, run.log);
    CHECK_MESSAGE(run.passed, run.log);
    if (c.vectors > 0) {
      // Flip one expected output bit; the same binary must now fail.
      std::string hex = read_file((dir / "expected.hex").string());
      hex[0] = hex[0] == '0' ? '1' : '0';
      write_file_atomic((dir / "expected.hex").string(), hex);
      const SimRun bad = rerun_testbench(dir);
      CHECK_FALSE(bad.passed);
      CHECK(bad.log.find("MISMATCH vector 0") != std::string::npos);
    }
    fs::remove_all(dir);
  }
}
