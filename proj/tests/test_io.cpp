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


#include <cmath>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "lutforge/config.hpp"
#include "lutforge/data.hpp"
#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/manifest.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name)
      : path(fs::temp_directory_path() / ("lutforge_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& n) const { return (path / n).string(); }
};

std::string ten_row_csv() {
  std::string s = "a,b,label\n";
  for (int r = 0; r < 10; ++r) {
    s += std::to_string(r) + "," + std::to_string(r * r % 7) + "," + std::to_string(r % 3) + "\n";
  }
  return s;
}

// Separation power recomputed from scratch with population sums.
double oracle_separation(const std::vector<double>& k, const std::vector<double>& p) {
  auto stats = [](const std::vector<double>& v, double& mean, double& sem) {
    double s = 0.0;
    for (double x : v) s += x;
    mean = s / v.size();
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    sem = std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
  };
  double mk, sk, mp, sp;
  stats(k, mk, sk);
  stats(p, mp, sp);
  return (mk - mp) / ((sk + sp) / 2.0);
}

}  // namespace

TEST_CASE("manifest save-load-save is byte identical") {
  std::mt19937_64 rng(1);
  Model m({6, 2});
  ConvOptions c;
  c.kernel = {3};
  c.stride = {1};
  c.padding = Padding::kSame;
  LutDenseOptions bn;
  bn.use_batchnorm = true;
  m.add_lut_conv(3, c, bn, rng);
  m.add_flatten();
  QDenseOptions wrap;
  wrap.act_mode = OverflowMode::kWrap;
  m.add_qdense(4, wrap, rng);
  m.add_lut_dense(2, {}, rng);
  m.seed = 42;
  m.config_hash = "abc123";
  m.task = Task::kRegression;
  warm_up(m, rng);

  const std::string a = manifest_to_string(m);
  Model back = manifest_from_string(a);
  CHECK(manifest_to_string(back) == a);
  CHECK(back.seed == 42);
  CHECK(back.config_hash == "abc123");
  CHECK(back.task == Task::kRegression);
  Tensor x = random_tensor({20, 6, 2}, rng);
  CHECK(back.forward_eval(x).data == m.forward_eval(x).data);

  TempDir dir("manifest");
  save_manifest(dir.file("m.json"), m);
  CHECK(read_file(dir.file("m.json")) == a);
  CHECK(manifest_to_string(load_manifest(dir.file("m.json"))) == a);
}

TEST_CASE("manifest errors") {
  CHECK_THROWS_AS(manifest_from_string("{not json"), DataError);
  CHECK_THROWS_AS(manifest_from_string("{}"), DataError);
  std::mt19937_64 rng(2);
  Model m({2});
  m.add_lut_dense(2, {}, rng);
  std::string s = manifest_to_string(m);
  const auto pos = s.find("\"version\": 1");
  REQUIRE(pos != std::string::npos);
  s.replace(pos, 12, "\"version\": 9");
  CHECK_THROWS_AS(manifest_from_string(s), DataError);
  CHECK_THROWS_AS(load_manifest("/nonexistent/model.json"), Error);
}

TEST_CASE("ten rows split into nine and one, reproducibly") {
  TempDir dir("split");
  write_file_atomic(dir.file("d.csv"), ten_row_csv());
  DatasetSpec spec;
  spec.path = dir.file("d.csv");
  spec.label_column = "label";
  spec.split_seed = 3;
  Dataset a = ingest(spec);
  Dataset b = ingest(spec);
  CHECK(a.train.size() == 9);
  CHECK(a.val.size() == 1);
  CHECK(a.test.size() == 0);
  CHECK(a.val_rows == b.val_rows);
  CHECK(a.train.x.data == b.train.x.data);
  CHECK(a.n_classes == 3);
  std::vector<std::size_t> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto sp = make_split(10, 0.1, 0.0, s);
    seen.push_back(sp.val[0]);
  }
  std::sort(seen.begin(), seen.end());
  CHECK(std::unique(seen.begin(), seen.end()) - seen.begin() > 1);
}

TEST_CASE("standardization uses training statistics") {
  TempDir dir("std");
  write_file_atomic(dir.file("d.csv"), ten_row_csv());
  DatasetSpec spec;
  spec.path = dir.file("d.csv");
  spec.split_seed = 1;
  spec.cache_path = dir.file("cache/d.lftd");
  Dataset d = ingest(spec);
  for (std::size_t f = 0; f < 2; ++f) {
    double m = 0.0, v = 0.0;
    for (std::size_t r = 0; r < d.train.size(); ++r) m += d.train.x.data[r * 2 + f];
    m /= d.train.size();
    for (std::size_t r = 0; r < d.train.size(); ++r) {
      v += std::pow(d.train.x.data[r * 2 + f] - m, 2);
    }
    CHECK(std::abs(m) < 1e-12);
    CHECK(v / d.train.size() == doctest::Approx(1.0));
  }
  Tensor cache = load_lftd(spec.cache_path);
  CHECK(cache.shape == Shape{10, 3});
}

TEST_CASE("LFTD round trip and corruption") {
  std::mt19937_64 rng(3);
  TempDir dir("lftd");
  Tensor t = random_tensor({7, 3, 2}, rng);
  for (auto& v : t.data) v = static_cast<float>(v);
  save_lftd(dir.file("t.lftd"), t);
  const std::string bytes = read_file(dir.file("t.lftd"));
  CHECK(bytes.substr(0, 4) == "LFTD");
  Tensor back = load_lftd(dir.file("t.lftd"));
  CHECK(back.shape == t.shape);
  CHECK(back.data == t.data);

  std::string bad = bytes;
  bad[20] ^= 0x40;
  write_file_atomic(dir.file("bad.lftd"), bad);
  CHECK_THROWS_AS(load_lftd(dir.file("bad.lftd")), DataError);
  write_file_atomic(dir.file("short.lftd"), bytes.substr(0, 30));
  CHECK_THROWS_AS(load_lftd(dir.file("short.lftd")), DataError);

  DatasetSpec spec;
  spec.path = dir.file("t2.lftd");
  spec.format = DataFormat::kTensor;
  Tensor table({10, 3});
  for (std::size_t r = 0; r < 10; ++r) {
    table.data[r * 3] = r;
    table.data[r * 3 + 1] = -static_cast<double>(r);
    table.data[r * 3 + 2] = r % 2;
  }
  save_lftd(spec.path, table);
  Dataset d = ingest(spec);
  CHECK(d.n_classes == 2);
  CHECK(d.train.size() + d.val.size() == 10);
}

TEST_CASE("overlapping splits are rejected") {
  SplitIndices s = make_split(50, 0.2, 0.1, 9);
  CHECK_NOTHROW(check_disjoint(s));
  CHECK(s.train.size() + s.val.size() + s.test.size() == 50);
  s.val.push_back(s.train.front());
  CHECK_THROWS_AS(check_disjoint(s), DataError);
}

TEST_CASE("CSV errors carry line numbers") {
  TempDir dir("csv");
  write_file_atomic(dir.file("a.csv"), "x,label\n1,0\n2\n");
  DatasetSpec spec;
  spec.path = dir.file("a.csv");
  try {
    ingest(spec);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write_file_atomic(dir.file("b.csv"), "x,label\n1,0\n2,zz\n");
  spec.path = dir.file("b.csv");
  CHECK_THROWS_AS(ingest(spec), DataError);
  write_file_atomic(dir.file("c.csv"), "x,label\n1,0\n2,7\n3,1\n");
  spec.path = dir.file("c.csv");
  spec.n_classes = 3;
  CHECK_THROWS_AS(ingest(spec), DataError);
  write_file_atomic(dir.file("d.csv"), "x,label\n1,0.5\n");
  spec.path = dir.file("d.csv");
  spec.n_classes = 0;
  CHECK_THROWS_AS(ingest(spec), DataError);
  write_file_atomic(dir.file("e.csv"), "");
  spec.path = dir.file("e.csv");
  CHECK_THROWS_AS(ingest(spec), DataError);
  spec.path = dir.file("missing.csv");
  CHECK_THROWS(ingest(spec));
}

TEST_CASE("accuracy examples") {
  Tensor out({4, 3}, std::vector<double>{1, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0});
  const std::vector<double> all{0, 1, 2, 0};
  CHECK(metric_accuracy(out, all) == 1.0);
  Tensor flat({4, 3}, 0.5);
  const std::vector<double> nonzero{1, 2, 1, 2};
  CHECK(metric_accuracy(flat, nonzero) == 0.0);
  const std::vector<double> half{0, 1, 0, 2};
  CHECK(metric_accuracy(out, half) == 0.5);
  CHECK_THROWS_AS(metric_accuracy(Tensor({0, 3}), std::vector<double>{}), DataError);
}

TEST_CASE("separation power") {
  // Means 20 and 14, standard errors 2.
  const std::vector<double> k{18, 22}, p{12, 16};
  auto s = metric_separation(k, p);
  REQUIRE(s.has_value());
  CHECK(*s == doctest::Approx(3.0).epsilon(1e-14));
  auto same = metric_separation(k, k);
  REQUIRE(same.has_value());
  CHECK(*same == 0.0);
  const std::vector<double> c{5, 5, 5};
  CHECK_FALSE(metric_separation(c, c).has_value());
  CHECK_THROWS_AS(metric_separation(std::vector<double>{}, c), DataError);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(10.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(2 + rng() % 30), b(2 + rng() % 30);
    for (auto& v : a) v = g(rng) + 2.0;
    for (auto& v : b) v = g(rng);
    auto r = metric_separation(a, b);
    REQUIRE(r.has_value());
    CHECK(std::abs(*r - oracle_separation(a, b)) <= 1e-12 * std::max(1.0, std::abs(*r)));
  }
}

TEST_CASE("mse") {
  Tensor a({2, 2}, std::vector<double>{1, 2, 3, 4});
  Tensor b({2, 2}, std::vector<double>{1, 0, 3, 5});
  CHECK(metric_mse(a, b) == doctest::Approx(5.0 / 4.0));
}

TEST_CASE("base64 and atomic writes") {
  std::mt19937_64 rng(5);
  for (std::size_t n = 0; n < 40; ++n) {
    std::string s(n, '\0');
    for (auto& ch : s) ch = static_cast<char>(rng());
    CHECK(base64_decode(base64_encode(s)) == s);
  }
  CHECK(base64_encode("foobar") == "Zm9vYmFy");
  CHECK(base64_encode("fo") == "Zm8=");
  CHECK_THROWS(base64_decode("Zm9v!mFy"));
  TempDir dir("atomic");
  write_file_atomic(dir.file("sub/x.txt"), "one");
  write_file_atomic(dir.file("sub/x.txt"), "two");
  CHECK(read_file(dir.file("sub/x.txt")) == "two");
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir.path / "sub")) {
    (void)e;
    ++n;
  }
  CHECK(n == 1);
}

TEST_CASE("run config parsing") {
  const std::string text = R"({
    "dataset": {"path": "x.csv", "label": "y", "n_classes": 5, "val_fraction": 0.2},
    "model": {"input_frac_bits": 5, "layers": [
      {"kind": "lut_conv", "units": 3, "kernel": [3], "padding": "same"},
      {"kind": "flatten"},
      {"kind": "lut_dense", "units": 4, "batchnorm": true, "hidden": 3},
      {"kind": "qdense", "units": 2, "act_mode": "WRAP"}]},
    "train": {"epochs": 3, "beta_start": 1e-6, "beta_end": 1e-4, "lut_x": 5, "lut_y": 4}
  })";
  RunConfig rc = parse_run_config(text);
  CHECK(rc.dataset.n_classes == 5);
  CHECK(rc.train.val_fraction == 0.2);
  CHECK(rc.train.epochs == 3);
  CHECK(rc.train.lut.x == 5);
  REQUIRE(rc.model.layers.size() == 4);
  CHECK(rc.model.layers[0].conv.stride == std::vector<std::size_t>{1});
  CHECK(rc.model.layers[2].lut.use_batchnorm);
  CHECK(rc.model.layers[3].qdense.act_mode == OverflowMode::kWrap);
  CHECK(rc.hash.size() == 16);
  CHECK(parse_run_config(text).hash == rc.hash);

  Model m = build_model(rc.model, {8, 2}, Task::kClassification, 1);
  CHECK(m.n_outputs() == 2);
  CHECK(m.layers().size() == 4);

  CHECK_THROWS_AS(parse_run_config("{\"train\": {\"epoch\": 3}}"), UsageError);
  CHECK_THROWS_AS(parse_run_config("[1, 2"), UsageError);
  CHECK_THROWS_AS(parse_run_config(R"({"model": {"layers": [{"kind": "rnn", "units": 2}]}})"),
                  UsageError);
}
