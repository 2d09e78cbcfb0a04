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
#include <random>

#include <doctest.h>

#include "lutforge/error.hpp"
#include "lutforge/layers.hpp"
#include "lutforge/model.hpp"
#include "lutforge/resource.hpp"
#include "test_util.hpp"

using namespace lutforge;
using namespace lutforge::testing;

namespace {

// Scalar rewrite of the LUT cost formula, kept deliberately naive.
double oracle_llut(int m, int n, int x, int y) {
  if (m <= 0 || n <= 0) return 0.0;
  if (m >= y) return std::pow(2.0, m - x) * n;
  return (static_cast<double>(m) / y) * std::pow(2.0, y - x) * n;
}

void set_width(QuantizerState& q, std::size_t e, int width) {
  q.is_signed[e] = 0;
  q.i_cal[e] = 0;
  q.f_raw[e] = width;
}

}  // namespace

TEST_CASE("ebops_llut examples") {
  CHECK(ebops_llut(8, 4) == 16.0);
  CHECK(ebops_llut(3, 4) == doctest::Approx(1.2).epsilon(1e-15));
  CHECK(ebops_llut(0, 7) == 0.0);
  CHECK(ebops_llut(7, 0) == 0.0);
}

TEST_CASE("ebops_llut matches the scalar oracle over the grid") {
  for (int m = 0; m <= 10; ++m) {
    for (int n = 0; n <= 8; ++n) {
      CHECK(ebops_llut(m, n) == doctest::Approx(oracle_llut(m, n, 6, 5)).epsilon(1e-15));
    }
  }
  for (int x = 1; x <= 8; ++x) {
    for (int y = 1; y <= x; ++y) {
      const LutPrimitiveSpec s{x, y};
      for (int m = 0; m <= 12; ++m) {
        CHECK(ebops_llut(m, 3, s) == doctest::Approx(oracle_llut(m, 3, x, y)).epsilon(1e-15));
      }
      // Both branches agree at m = Y.
      CHECK(ebops_llut(y, 5, s) == std::ldexp(5.0, y - x));
      CHECK(ebops_llut(y - 1e-12, 5, s) == doctest::Approx(std::ldexp(5.0, y - x)));
    }
  }
}

TEST_CASE("ebops_llut is monotone") {
  for (double m = 0; m <= 12; m += 0.25) {
    for (double n = 0; n <= 8; n += 0.5) {
      CHECK(ebops_llut(m + 0.25, n) >= ebops_llut(m, n));
      CHECK(ebops_llut(m, n + 0.5) >= ebops_llut(m, n));
    }
  }
}

TEST_CASE("primitive spec validation") {
  CHECK_THROWS(validate(LutPrimitiveSpec{4, 5}));
  CHECK_THROWS(validate(LutPrimitiveSpec{6, 0}));
  CHECK_NOTHROW(validate(LutPrimitiveSpec{6, 6}));
}

TEST_CASE("estimate_luts examples") {
  CHECK(estimate_luts(1.0) == 1.0);
  CHECK(estimate_luts(1000.0) == doctest::Approx(901.6).epsilon(1e-4));
  CHECK(estimate_luts(0.0) == 0.0);
  CHECK(estimate_luts(-3.0) == 0.0);
  double prev = 0.0;
  for (double e = 0.5; e < 1e6; e *= 1.7) {
    CHECK(estimate_luts(e) > prev);
    prev = estimate_luts(e);
  }
}

TEST_CASE("2x2 layer with m=6, n=2 costs 8") {
  std::mt19937_64 rng(1);
  Model m({2});
  LutDenseLayer& l = m.add_lut_dense(2, {}, rng);
  for (std::size_t e = 0; e < 4; ++e) {
    set_width(l.q_in, e, 6);
    set_width(l.q_out, e, 2);
  }
  l.q_in.calibrated = l.q_out.calibrated = true;
  CHECK(ebops_model(m) == 8.0);
  for (std::size_t e = 0; e < 4; ++e) set_width(l.q_out, e, 0);
  CHECK(ebops_model(m) == 0.0);
}

TEST_CASE("model EBOPs are the sum of per-L-LUT terms") {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> w(0, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t ci = 1 + rng() % 4, co = 1 + rng() % 4;
    Model m({ci});
    LutDenseLayer& l = m.add_lut_dense(co, {}, rng);
    double sum = 0.0;
    for (std::size_t e = 0; e < l.n_lluts(); ++e) {
      set_width(l.q_in, e, w(rng));
      set_width(l.q_out, e, w(rng));
      sum += oracle_llut(l.q_in.width(e), l.q_out.width(e), 6, 5);
    }
    CHECK(ebops_model(m) == doctest::Approx(sum).epsilon(1e-14));
    double terms = 0.0;
    for (std::size_t e = 0; e < l.n_lluts(); ++e) terms += ebops_llut_term(l, e);
    CHECK(terms == doctest::Approx(sum).epsilon(1e-14));
  }
}

TEST_CASE("raising a fractional width never lowers EBOPs") {
  std::mt19937_64 rng(4);
  Model m({3});
  m.add_lut_dense(4, {}, rng);
  m.add_qdense(2, {}, rng);
  warm_up(m, rng);
  const double base = ebops_model(m);
  for (auto& p : m.params()) {
    if (!p.name.ends_with(".f")) continue;
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double saved = p.value[e];
      p.value[e] = saved + 1.0;
      CHECK(ebops_model(m) >= base);
      p.value[e] = saved;
    }
  }
  m.zero_grad();
  ebops_backward(m, 1.0);
  for (auto& p : m.params()) {
    if (!p.name.ends_with(".f")) continue;
    for (double g : p.grad) CHECK(g >= 0.0);
  }
}

TEST_CASE("soft EBOPs gradient matches finite differences") {
  std::mt19937_64 rng(5);
  Model m({3});
  m.add_lut_dense(3, {}, rng);
  warm_up(m, rng);
  std::uniform_real_distribution<double> u(-0.45, 0.45);
  for (auto& p : m.params()) {
    if (p.name.ends_with(".f")) {
      for (auto& v : p.value) v = 2.0 + static_cast<double>(rng() % 6) + u(rng);
    }
  }
  m.zero_grad();
  ebops_backward(m, 1.0);
  for (auto& p : m.params()) {
    if (!p.name.ends_with(".f")) continue;
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double h = 1e-6, saved = p.value[e];
      p.value[e] = saved + h;
      const double up = ebops_model(m, WidthMode::kSoft);
      p.value[e] = saved - h;
      const double down = ebops_model(m, WidthMode::kSoft);
      p.value[e] = saved;
      CHECK(p.grad[e] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-5));
    }
  }
}

TEST_CASE("qdense cost is the bit-product sum") {
  std::mt19937_64 rng(6);
  Model m({3});
  QDenseLayer& q = m.add_qdense(2, {}, rng);
  warm_up(m, rng);
  double expect = 0.0;
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t i = 0; i < 2; ++i) {
      expect += q.q_w.width(j * 2 + i) * q.q_act.width(j);
    }
  }
  CHECK(ebops_model(m) == expect);
  const auto br = resource_breakdown(m);
  REQUIRE(br.size() == 1);
  CHECK(br[0].ebops == expect);
}
