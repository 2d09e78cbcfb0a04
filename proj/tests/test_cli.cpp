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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "lutforge/io.hpp"
#include "lutforge/ir.hpp"
#include "lutforge/manifest.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;
namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string("'") + LUTFORGE_CLI + "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("command line exit codes and round trip") {
  const fs::path dir = fs::temp_directory_path() / "lutforge_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";

  std::mt19937_64 rng(1);
  Model m({4});
  randomize(m.add_lut_dense(3, {}, rng), rng);
  randomize(m.add_lut_dense(2, {}, rng), rng);
  warm_up(m, rng);
  const std::string manifest = (dir / "model.json").string();
  const std::string program = (dir / "p.lfir").string();
  save_manifest(manifest, m);

  CHECK(run_cli("compile '" + manifest + "' --out '" + program + "'", log) == 0);
  CHECK(load_program(program).n_outputs() == 2);
  CHECK(run_cli("verify '" + manifest + "' '" + program + "' --vectors 2000", log) == 0);
  CHECK(run_cli("estimate '" + manifest + "' --csv", log) == 0);
  CHECK(run_cli("emit-rtl '" + program + "' --out '" + (dir / "rtl").string() + "' --vectors 8",
                log) == 0);
  CHECK(fs::exists(dir / "rtl" / "top.v"));

  CHECK(run_cli("no-such-command", log) == 2);
  CHECK(run_cli("compile", log) == 2);
  CHECK(run_cli("compile '" + (dir / "missing.json").string() + "'", log) == 3);
  CHECK(read_file(log.string()).find("error:") != std::string::npos);

  // A program compiled from a different model must fail verification.
  Model other({4});
  randomize(other.add_lut_dense(3, {}, rng), rng);
  randomize(other.add_lut_dense(2, {}, rng), rng);
  warm_up(other, rng);
  const std::string other_manifest = (dir / "other.json").string();
  save_manifest(other_manifest, other);
  CHECK(run_cli("verify '" + other_manifest + "' '" + program + "' --vectors 500", log) == 1);
  fs::remove_all(dir);
}
