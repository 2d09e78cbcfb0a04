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


#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include <doctest.h>

#include "lutforge/data.hpp"
#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/resource.hpp"
#include "lutforge/trainer.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;

namespace {

// Two Gaussian-free classes split by x0 + x1 = 0 with a margin.
Dataset separable(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Dataset d;
  d.task = Task::kClassification;
  d.n_classes = 2;
  auto fill = [&](Split& s, std::size_t rows) {
    s.x = Tensor({rows, 2});
    s.y = Tensor({rows, 1});
    for (std::size_t r = 0; r < rows;) {
      const double a = u(rng), b = u(rng);
      if (std::abs(a + b) < 0.3) continue;
      s.x.data[r * 2] = a;
      s.x.data[r * 2 + 1] = b;
      s.y.data[r] = a + b > 0 ? 1.0 : 0.0;
      ++r;
    }
  };
  fill(d.train, n);
  fill(d.val, n / 5);
  return d;
}

struct ScalarAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double p, double g, double lr) {
    ++t;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t));
    const double vh = v / (1 - std::pow(0.999, t));
    return p - lr * mh / (std::sqrt(vh) + 1e-8);
  }
};

TrainConfig quick(std::size_t epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 32;
  c.lr_base = 1e-2;
  return c;
}

}  // namespace

TEST_CASE("beta schedule examples") {
  TrainConfig c;
  CHECK(beta_at(0, 100, c) == doctest::Approx(5e-7).epsilon(1e-14));
  CHECK(beta_at(100, 100, c) == doctest::Approx(1e-3).epsilon(1e-14));
  CHECK(beta_at(50, 100, c) == doctest::Approx(2.2360679775e-5).epsilon(1e-10));
  double prev = 0.0;
  for (int t = 0; t <= 100; ++t) {
    CHECK(beta_at(t, 100, c) >= prev);
    prev = beta_at(t, 100, c);
  }
  c.beta_start = c.beta_end = 0.0;
  CHECK(beta_at(40, 100, c) == 0.0);
}

TEST_CASE("cosine restart examples") {
  CHECK(lr_at(0, 1e-3, 10, 2) == 1e-3);
  CHECK(lr_at(10, 1e-3, 10, 2) == doctest::Approx(0.0));
  CHECK(lr_at(5, 1e-3, 10, 2) == doctest::Approx(5e-4).epsilon(1e-12));
  // Second period is twice as long.
  CHECK(lr_at(20, 1e-3, 10, 2) == doctest::Approx(5e-4).epsilon(1e-12));
  CHECK(lr_at(30, 1e-3, 10, 2) == doctest::Approx(0.0));
  for (double t = 0; t < 200; t += 0.7) {
    const double lr = lr_at(t, 1e-3, 7, 1.5);
    CHECK(lr >= 0.0);
    CHECK(lr <= 1e-3);
  }
}

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(validate(c));
  c.beta_end = 1e-9;
  CHECK_THROWS_AS(validate(c), UsageError);
  c = TrainConfig{};
  c.val_fraction = 0.0;
  CHECK_THROWS_AS(validate(c), UsageError);
  c = TrainConfig{};
  c.beta_start = c.beta_end = 0.0;
  CHECK_NOTHROW(validate(c));
}

TEST_CASE("adam matches a scalar oracle for 100 steps") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> p(5), grad(5);
  for (auto& v : p) v = g(rng);
  std::vector<double> ref = p;
  std::vector<ScalarAdam> oracle(5);
  Adam adam;
  std::vector<ParamRef> params{{"p", p, grad}};
  for (int s = 0; s < 100; ++s) {
    const double lr = 1e-2 * (1.0 + 0.01 * s);
    for (std::size_t k = 0; k < 5; ++k) grad[k] = g(rng) + p[k];
    for (std::size_t k = 0; k < 5; ++k) ref[k] = oracle[k].step(ref[k], grad[k], lr);
    CHECK(adam.step(params, lr));
    for (std::size_t k = 0; k < 5; ++k) CHECK(std::abs(p[k] - ref[k]) <= 1e-12);
  }
}

TEST_CASE("adam first step and skipped steps") {
  std::vector<double> p{1.0, 1.0, 1.0}, g{0.3, -2.0, 0.0};
  std::vector<ParamRef> params{{"p", p, g}};
  Adam adam;
  adam.step(params, 0.01);
  CHECK(p[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(1.01).epsilon(1e-6));
  CHECK(p[2] == 1.0);

  g = {NAN, 1.0, 1.0};
  const std::vector<double> before = p;
  CHECK_FALSE(adam.step(params, 0.01));
  CHECK(p == before);
  CHECK(adam.skipped() == 1);
}

TEST_CASE("pareto set keeps only non-dominated entries") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ParetoSet set;
  std::vector<ParetoEntry> all;
  for (int k = 0; k < 300; ++k) {
    ParetoEntry e{std::floor(u(rng) * 50), std::floor(u(rng) * 50) / 50,
                  "c" + std::to_string(k), static_cast<std::size_t>(k)};
    all.push_back(e);
    std::vector<std::string> evicted;
    set.insert(e, &evicted);
    const auto& es = set.entries();
    for (std::size_t a = 0; a < es.size(); ++a) {
      for (std::size_t b = 0; b < es.size(); ++b) {
        if (a != b) CHECK_FALSE(dominates(es[a], es[b]));
      }
      if (a > 0) CHECK(es[a - 1].ebops <= es[a].ebops);
    }
    for (const auto& id : evicted) {
      CHECK(std::none_of(es.begin(), es.end(),
                         [&](const ParetoEntry& x) { return x.checkpoint_id == id; }));
    }
  }
  // Every point seen is dominated by or equal to a member.
  for (const auto& e : all) {
    CHECK(std::any_of(set.entries().begin(), set.entries().end(), [&](const ParetoEntry& m) {
      return dominates(m, e) || (m.ebops == e.ebops && m.metric == e.metric);
    }));
  }
  ParetoSet s2;
  CHECK(s2.insert({10, 0.5, "a", 0}));
  CHECK_FALSE(s2.insert({10, 0.5, "b", 1}));
  CHECK_FALSE(s2.insert({11, 0.4, "c", 2}));
}

TEST_CASE("task loss gradients") {
  std::mt19937_64 rng(3);
  Tensor out = random_tensor({4, 3}, rng);
  Tensor y({4, 1}, std::vector<double>{0, 2, 1, 2});
  Tensor g;
  const double l = task_loss(out, y, Task::kClassification, &g);
  for (std::size_t k = 0; k < out.size(); ++k) {
    Tensor a = out, b = out;
    a.data[k] += 1e-6;
    b.data[k] -= 1e-6;
    const double num = (task_loss(a, y, Task::kClassification, nullptr) -
                        task_loss(b, y, Task::kClassification, nullptr)) / 2e-6;
    CHECK(g.data[k] == doctest::Approx(num).epsilon(1e-6));
  }
  CHECK(l > 0.0);
  Tensor t = random_tensor({4, 3}, rng);
  task_loss(out, t, Task::kRegression, &g);
  CHECK(g.data[0] == doctest::Approx(2.0 * (out.data[0] - t.data[0]) / 12.0));
}

TEST_CASE("beta fixed at zero separates a linearly separable set") {
  Dataset d = separable(800, 4);
  std::mt19937_64 rng(4);
  Model m({2});
  m.add_lut_dense(4, {}, rng);
  m.add_lut_dense(2, {}, rng);
  TrainConfig c = quick(15);
  c.beta_start = c.beta_end = 0.0;
  TrainResult r = train(m, d, c);
  CHECK(r.best_val_metric >= 0.99);
}

TEST_CASE("a beta sweep lowers EBOPs") {
  Dataset d = separable(600, 5);
  std::vector<double> ratio;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    std::mt19937_64 rng(seed);
    Model m({2});
    m.add_lut_dense(4, {}, rng);
    m.add_lut_dense(2, {}, rng);
    TrainConfig c = quick(10);
    c.seed = seed;
    c.beta_start = 1e-4;
    c.beta_end = 1e-1;
    TrainResult r = train(m, d, c);
    ratio.push_back(r.log.back().ebops / r.log.front().ebops);
  }
  std::sort(ratio.begin(), ratio.end());
  CHECK(ratio[2] < 1.0);
}

TEST_CASE("float training loss decreases on a convex problem") {
  std::mt19937_64 rng(6);
  Dataset d;
  d.task = Task::kRegression;
  d.train.x = random_tensor({512, 3}, rng, -1, 1);
  d.train.y = Tensor({512, 1});
  for (std::size_t r = 0; r < 512; ++r) {
    const double* x = &d.train.x.data[r * 3];
    d.train.y.data[r] = 0.7 * x[0] - 1.3 * x[1] + 0.2 * x[2] + 0.5;
  }
  d.val = d.train;
  Model m({3});
  m.add_qdense(1, {}, rng);
  TrainConfig c = quick(25);
  c.quantized = false;
  c.beta_start = c.beta_end = 0.0;
  c.lr_base = 3e-3;
  TrainResult r = train(m, d, c);
  for (std::size_t e = 1; e < r.log.size(); ++e) {
    CHECK(r.log[e].train_loss <= r.log[e - 1].train_loss);
  }
}

TEST_CASE("training is reproducible and writes its artifacts") {
  Dataset d = separable(300, 7);
  auto run = [&](const std::string& dir) {
    std::mt19937_64 rng(7);
    Model m({2});
    m.add_lut_dense(3, {}, rng);
    m.add_lut_dense(2, {}, rng);
    TrainConfig c = quick(6);
    c.seed = 7;
    c.out_dir = dir;
    return train(m, d, c);
  };
  const auto tmp = std::filesystem::temp_directory_path() / "lutforge_train_test";
  std::filesystem::remove_all(tmp);
  TrainResult a = run((tmp / "a").string());
  TrainResult b = run((tmp / "b").string());
  CHECK(a.pareto == b.pareto);
  CHECK(read_file((tmp / "a/run_log.csv").string()) ==
        read_file((tmp / "b/run_log.csv").string()));
  CHECK(read_file((tmp / "a/run_log.csv").string()).starts_with(
      "epoch,beta,lr,train_loss,val_metric,ebops\n"));
  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(tmp / "a/checkpoints")) {
    (void)f;
    ++files;
  }
  CHECK(files == a.pareto.size());
  for (const auto& e : a.pareto.entries()) {
    CHECK(std::filesystem::exists(tmp / "a/checkpoints" / (e.checkpoint_id + ".json")));
    CHECK(a.checkpoints.count(e.checkpoint_id) == 1);
  }
  std::filesystem::remove_all(tmp);
}

TEST_CASE("training errors") {
  Dataset empty;
  empty.train.x = Tensor({0, 2});
  empty.train.y = Tensor({0, 1});
  std::mt19937_64 rng(8);
  Model m({2});
  m.add_lut_dense(2, {}, rng);
  CHECK_THROWS_AS(train(m, empty, quick(1)), TrainingError);

  Dataset bad = separable(64, 8);
  for (auto& v : bad.train.x.data) v = NAN;
  TrainConfig c = quick(20);
  c.quantized = false;
  c.beta_start = c.beta_end = 0.0;
  c.max_nan_steps = 3;
  CHECK_THROWS_AS(train(m, bad, c), TrainingError);
}
