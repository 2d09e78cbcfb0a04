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


// lutforge: train, compile, check and emit LUT-based networks.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "lutforge/config.hpp"
#include "lutforge/data.hpp"
#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/ir.hpp"
#include "lutforge/lowering.hpp"
#include "lutforge/manifest.hpp"
#include "lutforge/resource.hpp"
#include "lutforge/rtl.hpp"
#include "lutforge/trainer.hpp"
#include "lutforge/verify.hpp"

namespace fs = std::filesystem;
using namespace lutforge;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct Flags {
  std::string config;
  std::string out;
  std::string manifest;
  std::string program;
  std::string input;
  std::string run_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double beta_start = -1.0;
  double beta_end = -1.0;
  std::size_t vectors = 10000;
  int stage_depth = 4;
  int lut_x = 6;
  int lut_y = 5;
  bool csv = false;
  bool quiet = false;
};

LutPrimitiveSpec lut_spec(const Flags& f) {
  LutPrimitiveSpec s{f.lut_x, f.lut_y};
  validate(s);
  return s;
}

LowerOptions lower_opts(const Flags& f) {
  LowerOptions o;
  o.lut = lut_spec(f);
  return o;
}

// Resolves the dataset, applying the --seed override to the split.
RunConfig run_config(const Flags& f) {
  if (f.config.empty()) throw UsageError("--config is required");
  RunConfig rc = load_run_config(f.config);
  if (f.seed_set) {
    rc.train.seed = f.seed;
    rc.dataset.split_seed = f.seed;
  }
  if (f.beta_start >= 0.0) rc.train.beta_start = f.beta_start;
  if (f.beta_end >= 0.0) rc.train.beta_end = f.beta_end;
  rc.train.lut = lut_spec(f);
  return rc;
}

int cmd_ingest(const Flags& f) {
  RunConfig rc = run_config(f);
  if (!f.out.empty()) rc.dataset.cache_path = (fs::path(f.out) / "dataset.lftd").string();
  Dataset d = ingest(rc.dataset);
  std::printf("task=%s classes=%zu features=%zu train=%zu val=%zu test=%zu\n",
              std::string(to_string(d.task)).c_str(), d.n_classes,
              d.train.x.shape.size() > 1 ? shape_size(d.train.x.sample_shape()) : 0,
              d.train.size(), d.val.size(), d.test.size());
  if (!rc.dataset.cache_path.empty()) {
    std::printf("cache: %s\n", rc.dataset.cache_path.c_str());
  }
  return kExitOk;
}

int cmd_train(const Flags& f) {
  RunConfig rc = run_config(f);
  if (f.out.empty()) throw UsageError("--out is required");
  Dataset d = ingest(rc.dataset);
  Model model = build_model(rc.model, d.train.x.sample_shape(), d.task,
                            rc.train.seed);
  model.config_hash = rc.hash;
  rc.train.out_dir = f.out;
  TrainResult r = train(model, d, rc.train, [&](const EpochLog& e) {
    if (!f.quiet) {
      std::printf("epoch %zu beta=%.3g lr=%.3g loss=%.5f val=%.5f ebops=%.1f\n",
                  e.epoch, e.beta, e.lr, e.train_loss, e.val_metric, e.ebops);
      std::fflush(stdout);
    }
  });
  save_manifest((fs::path(f.out) / "model.json").string(), model);
  std::printf("pareto points: %zu, best val metric %.5f, skipped steps %zu\n",
              r.pareto.size(), r.best_val_metric, r.skipped_steps);
  if (!d.test.x.data.empty()) {
    std::printf("test metric (final model): %.5f\n",
                evaluate(model, d.test, d.task));
  }
  return kExitOk;
}

int cmd_compile(const Flags& f) {
  Model model = load_manifest(f.manifest);
  IrProgram p = lower(model, lower_opts(f));
  const std::string out = f.out.empty() ? "program.lfir" : f.out;
  save_program(out, p);
  const ProgramStats s = program_stats(p);
  std::printf("wrote %s: %zu instructions, %zu tables\n", out.c_str(),
              p.instrs.size(), p.tables.size());
  for (int op = 0; op < 11; ++op) {
    if (s.per_op[op]) {
      std::printf("  %-10s %zu\n", std::string(to_string(static_cast<Op>(op))).c_str(),
                  s.per_op[op]);
    }
  }
  return kExitOk;
}

int cmd_estimate(const Flags& f) {
  Model model = load_manifest(f.manifest);
  LowerReport r = lower_report(model, lower_opts(f));
  std::fputs(f.csv ? r.to_csv().c_str() : r.to_text().c_str(), stdout);
  return kExitOk;
}

std::vector<std::vector<double>> read_rows(const std::string& path,
                                           std::size_t width) {
  std::vector<std::vector<double>> rows;
  if (path.ends_with(".lftd")) {
    Tensor t = load_lftd(path);
    const std::size_t n = t.batch();
    const std::size_t w = n ? t.data.size() / n : 0;
    if (w != width) {
      throw DataError(path + ": expected " + std::to_string(width) +
                      " values per row, got " + std::to_string(w));
    }
    for (std::size_t r = 0; r < n; ++r) {
      rows.emplace_back(t.data.begin() + r * w, t.data.begin() + (r + 1) * w);
    }
    return rows;
  }
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t lineno = 0;
  std::getline(in, line);  // header
  ++lineno;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw DataError(path + ":" + std::to_string(lineno) +
                        ": not a number: '" + cell + "'");
      }
    }
    if (row.size() != width) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected " +
                      std::to_string(width) + " values, got " +
                      std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

int cmd_emulate(const Flags& f) {
  IrProgram p = load_program(f.program);
  const std::size_t ni = p.n_inputs();
  const std::size_t no = p.n_outputs();
  std::vector<std::uint64_t> bits;
  std::size_t n = 0;
  if (f.input.empty()) {
    n = f.vectors;
    bits = random_inputs(p, n, f.seed);
  } else {
    auto rows = read_rows(f.input, ni);
    n = rows.size();
    bits.reserve(n * ni);
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < ni; ++k) {
        const FxpFormat& fmt = p.input_formats[k];
        const double q =
            quantize_value(row[k], fmt, OverflowMode::kSat, RoundMode::kRnd);
        bits.push_back(to_bits(q, fmt));
      }
    }
  }
  std::vector<std::uint64_t> out = interpret_batch(p, bits);
  std::ostringstream csv;
  csv.precision(17);
  for (std::size_t o = 0; o < no; ++o) csv << (o ? "," : "") << "y" << o;
  csv << "\n";
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t o = 0; o < no; ++o) {
      csv << (o ? "," : "") << from_bits(out[r * no + o], p.output_formats[o]);
    }
    csv << "\n";
  }
  if (f.out.empty()) {
    std::fputs(csv.str().c_str(), stdout);
  } else {
    write_file_atomic(f.out, csv.str());
  }
  return kExitOk;
}

int cmd_verify(const Flags& f) {
  Model model = load_manifest(f.manifest);
  IrProgram p = load_program(f.program);
  VerifyResult r = verify(model, p, f.vectors, f.seed);
  std::puts(r.summary().c_str());
  return r.mismatches == 0 ? kExitOk : kExitMismatch;
}

int cmd_emit_rtl(const Flags& f) {
  if (f.out.empty()) throw UsageError("--out is required");
  IrProgram p = load_program(f.program);
  RtlOptions o;
  o.stage_depth = f.stage_depth;
  RtlDesign d = write_rtl_bundle(p, f.out, f.vectors, f.seed, o);
  std::printf("wrote %s: %d pipeline stages, latency %d, %d-bit in, %d-bit out\n",
              f.out.c_str(), d.stages, d.latency, d.in_width, d.out_width);
  return kExitOk;
}

int cmd_pareto(const Flags& f) {
  const fs::path csv = fs::path(f.run_dir) / "pareto.csv";
  std::fputs(read_file(csv.string()).c_str(), stdout);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lutforge: LUT-based neural networks to bit-exact RTL"};
  app.require_subcommand(1);
  Flags f;

  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { f.seed = s; f.seed_set = true; },
        "Random seed");
  };
  auto add_lut = [&](CLI::App* c) {
    c->add_option("--lut-x", f.lut_x, "Inputs of the physical LUT primitive");
    c->add_option("--lut-y", f.lut_y, "Inputs of the split LUT primitive");
  };

  auto* ingest_c = app.add_subcommand("ingest", "Parse, split and cache a dataset");
  ingest_c->add_option("--config", f.config, "Run config (JSON)")->required();
  ingest_c->add_option("--out", f.out, "Directory for dataset.lftd");
  add_seed(ingest_c);

  auto* train_c = app.add_subcommand("train", "Train with a beta sweep");
  train_c->add_option("--config", f.config, "Run config (JSON)")->required();
  train_c->add_option("--out", f.out, "Run directory")->required();
  train_c->add_option("--beta-start", f.beta_start, "Initial beta");
  train_c->add_option("--beta-end", f.beta_end, "Final beta");
  train_c->add_flag("--quiet", f.quiet, "No per-epoch lines");
  add_seed(train_c);
  add_lut(train_c);

  auto* compile_c = app.add_subcommand("compile", "Lower a model to an LFIR program");
  compile_c->add_option("manifest", f.manifest, "Model manifest")->required();
  compile_c->add_option("--out", f.out, "Program path (default program.lfir)");
  add_lut(compile_c);

  auto* estimate_c = app.add_subcommand("estimate", "Per-layer resource report");
  estimate_c->add_option("manifest", f.manifest, "Model manifest")->required();
  estimate_c->add_flag("--csv", f.csv, "CSV instead of a table");
  add_lut(estimate_c);

  auto* emulate_c = app.add_subcommand("emulate", "Run a program on inputs");
  emulate_c->add_option("program", f.program, "LFIR program")->required();
  emulate_c->add_option("--input", f.input, "CSV (with header) or .lftd rows");
  emulate_c->add_option("--vectors", f.vectors, "Random vectors when no --input");
  emulate_c->add_option("--out", f.out, "Output CSV (default stdout)");
  add_seed(emulate_c);

  auto* verify_c = app.add_subcommand("verify", "Check a program against its model");
  verify_c->add_option("manifest", f.manifest, "Model manifest")->required();
  verify_c->add_option("program", f.program, "LFIR program")->required();
  verify_c->add_option("--vectors", f.vectors, "Random input vectors");
  add_seed(verify_c);

  auto* rtl_c = app.add_subcommand("emit-rtl", "Write Verilog and a testbench");
  rtl_c->add_option("program", f.program, "LFIR program")->required();
  rtl_c->add_option("--out", f.out, "Output directory")->required();
  rtl_c->add_option("--stage-depth", f.stage_depth, "Logic levels per stage; 0 is combinational")
      ->check(CLI::NonNegativeNumber);
  rtl_c->add_option("--vectors", f.vectors, "Testbench vectors");
  add_seed(rtl_c);

  auto* pareto_c = app.add_subcommand("pareto", "Print a run's Pareto set as CSV");
  pareto_c->add_option("run_dir", f.run_dir, "Run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (ingest_c->parsed()) return cmd_ingest(f);
    if (train_c->parsed()) return cmd_train(f);
    if (compile_c->parsed()) return cmd_compile(f);
    if (estimate_c->parsed()) return cmd_estimate(f);
    if (emulate_c->parsed()) return cmd_emulate(f);
    if (verify_c->parsed()) return cmd_verify(f);
    if (rtl_c->parsed()) return cmd_emit_rtl(f);
    if (pareto_c->parsed()) return cmd_pareto(f);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
