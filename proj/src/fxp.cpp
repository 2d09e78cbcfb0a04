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

#include "lutforge/fxp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lutforge/error.hpp"

namespace lutforge {

namespace {

std::uint64_t low_mask(int w) {
  return w >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << w) - 1;
}

int bit_length(unsigned __int128 v) {
  int n = 0;
  while (v != 0) {
    ++n;
    v >>= 1;
  }
  return n;
}

}  // namespace

double FxpFormat::step() const { return std::ldexp(1.0, -frac_bits); }

double FxpFormat::min_value() const {
  const int w = width();
  if (w == 0 || !is_signed) return 0.0;
  return -std::ldexp(1.0, w - 1 - frac_bits);
}

double FxpFormat::max_value() const {
  const int w = width();
  if (w == 0) return 0.0;
  const int top = is_signed ? w - 1 : w;
  return std::ldexp(1.0, top - frac_bits) - step();
}

std::int64_t FxpFormat::min_raw() const {
  const int w = width();
  if (w == 0 || !is_signed) return 0;
  return static_cast<std::int64_t>(-(static_cast<__int128>(1) << (w - 1)));
}

std::int64_t FxpFormat::max_raw() const {
  const int w = width();
  if (w == 0) return 0;
  const int top = is_signed ? w - 1 : w;
  return static_cast<std::int64_t>((static_cast<__int128>(1) << top) - 1);
}

std::string to_string(const FxpFormat& fmt) {
  return std::string(fmt.is_signed ? "fixed<" : "ufixed<") +
         std::to_string(fmt.int_bits) + "," + std::to_string(fmt.frac_bits) +
         ">";
}

FxpFormat covering_format(__int128 lo_raw, __int128 hi_raw, int frac_bits) {
  const bool is_signed = lo_raw < 0;
  int w = 0;
  if (!is_signed) {
    w = bit_length(static_cast<unsigned __int128>(hi_raw));
  } else {
    const auto pos = static_cast<unsigned __int128>(hi_raw > 0 ? hi_raw : 0);
    const auto neg = static_cast<unsigned __int128>(-lo_raw - 1);
    w = 1 + std::max(bit_length(pos), bit_length(neg));
  }
  w = std::max(w, 1);
  return FxpFormat{is_signed, w - frac_bits - (is_signed ? 1 : 0), frac_bits};
}

bool is_representable(double v, const FxpFormat& fmt) {
  if (!std::isfinite(v)) return false;
  if (fmt.width() == 0) return v == 0.0;
  const double scaled = std::ldexp(v, fmt.frac_bits);
  if (scaled != std::floor(scaled)) return false;
  return scaled >= static_cast<double>(fmt.min_raw()) &&
         scaled <= static_cast<double>(fmt.max_raw());
}

std::uint64_t bits_from_raw(std::int64_t raw, const FxpFormat& fmt) {
  return static_cast<std::uint64_t>(raw) & low_mask(fmt.width());
}

std::int64_t raw_from_bits(std::uint64_t bits, const FxpFormat& fmt) {
  const int w = fmt.width();
  if (w == 0) return 0;
  bits &= low_mask(w);
  if (fmt.is_signed && w < 64 && ((bits >> (w - 1)) & 1U) != 0) {
    bits |= ~low_mask(w);
  }
  return static_cast<std::int64_t>(bits);
}

std::uint64_t to_bits(double v, const FxpFormat& fmt) {
  if (!is_representable(v, fmt)) {
    throw EncodingError("value " + std::to_string(v) +
                        " is not representable in " + to_string(fmt));
  }
  if (fmt.width() == 0) return 0;
  const auto raw = static_cast<std::int64_t>(std::ldexp(v, fmt.frac_bits));
  return bits_from_raw(raw, fmt);
}

double from_bits(std::uint64_t bits, const FxpFormat& fmt) {
  const int w = fmt.width();
  if (w < 64 && (bits >> w) != 0) {
    throw EncodingError("bit pattern " + std::to_string(bits) +
                        " does not fit " + to_string(fmt));
  }
  return std::ldexp(static_cast<double>(raw_from_bits(bits, fmt)),
                    -fmt.frac_bits);
}

std::string_view to_string(OverflowMode m) {
  return m == OverflowMode::kWrap ? "WRAP" : "SAT";
}

std::string_view to_string(RoundMode m) {
  return m == RoundMode::kTrn ? "TRN" : "RND";
}

OverflowMode parse_overflow_mode(std::string_view s) {
  if (s == "WRAP") return OverflowMode::kWrap;
  if (s == "SAT") return OverflowMode::kSat;
  throw DataError("unknown overflow mode '" + std::string(s) + "'");
}

RoundMode parse_round_mode(std::string_view s) {
  if (s == "TRN") return RoundMode::kTrn;
  if (s == "RND") return RoundMode::kRnd;
  throw DataError("unknown rounding mode '" + std::string(s) + "'");
}

namespace {

// Rounded integer before overflow handling.
double rounded_scaled(double x, const FxpFormat& fmt, RoundMode rounding) {
  const double scaled = std::ldexp(x, fmt.frac_bits);
  return rounding == RoundMode::kTrn ? std::floor(scaled) : std::round(scaled);
}

}  // namespace

double quantize_value(double x, const FxpFormat& fmt, OverflowMode mode,
                      RoundMode rounding) {
  const int w = fmt.width();
  if (w == 0) return 0.0;
  double k = rounded_scaled(x, fmt, rounding);
  const double span = std::ldexp(1.0, w);
  const double lo = fmt.is_signed ? -span / 2 : 0.0;
  const double hi = lo + span - 1.0;
  if (mode == OverflowMode::kWrap) {
    if (k < lo || k > hi) {
      k = std::fmod(k, span);
      if (k < lo) k += span;
      if (k > hi) k -= span;
    }
  } else {
    k = std::clamp(k, lo, hi);
  }
  return std::ldexp(k, -fmt.frac_bits);
}

QuantizerState::QuantizerState(std::size_t n, OverflowMode mode_,
                               RoundMode rounding_, double init_f)
    : mode(mode_),
      rounding(rounding_),
      f_raw(n, init_f),
      i_cal(n, 0),
      is_signed(n, 0),
      f_grad(n, 0.0) {}

int QuantizerState::frac(std::size_t e) const {
  const auto f = static_cast<int>(std::round(f_raw[e]));
  return std::clamp(f, min_f, max_f);
}

FxpFormat QuantizerState::format(std::size_t e) const {
  return FxpFormat{is_signed[e] != 0, i_cal[e], frac(e)};
}

double QuantizerState::soft_width(std::size_t e) const {
  const double f = std::clamp(f_raw[e], static_cast<double>(min_f),
                              static_cast<double>(max_f));
  const double w = i_cal[e] + f + (is_signed[e] != 0 ? 1.0 : 0.0);
  return w > 0.0 ? w : 0.0;
}

double QuantizerState::soft_width_grad(std::size_t e) const {
  if (f_raw[e] < min_f || f_raw[e] > max_f) return 0.0;
  return soft_width(e) > 0.0 ? 1.0 : 0.0;
}

void QuantizerState::zero_grad() {
  f_grad.assign(f_raw.size(), 0.0);
}

void quantize(std::span<const double> x, const QuantizerState& q,
              std::span<double> out) {
  const std::size_t n = q.size();
  if (n == 0 || x.size() % n != 0 || out.size() != x.size()) {
    throw ShapeError("quantize: tensor size " + std::to_string(x.size()) +
                     " is not a multiple of quantizer size " +
                     std::to_string(n));
  }
  if (!q.enabled) {
    std::copy(x.begin(), x.end(), out.begin());
    return;
  }
  std::vector<FxpFormat> fmts(n);
  for (std::size_t e = 0; e < n; ++e) fmts[e] = q.format(e);
  for (std::size_t k = 0; k < x.size(); ++k) {
    out[k] = quantize_value(x[k], fmts[k % n], q.mode, q.rounding);
  }
}

std::vector<double> quantize(std::span<const double> x,
                             const QuantizerState& q) {
  std::vector<double> out(x.size());
  quantize(x, q, out);
  return out;
}

double quantize_grad_x(double upstream, double x, const FxpFormat& fmt,
                       OverflowMode mode, RoundMode rounding) {
  const int w = fmt.width();
  if (w == 0) return 0.0;
  if (mode == OverflowMode::kWrap) return upstream;
  const double k = rounded_scaled(x, fmt, rounding);
  const double span = std::ldexp(1.0, w);
  const double lo = fmt.is_signed ? -span / 2 : 0.0;
  const double hi = lo + span - 1.0;
  return (k < lo || k > hi) ? 0.0 : upstream;
}

double quantize_grad_f(double upstream, double x, double qx) {
  return upstream * std::numbers::ln2 * (x - qx);
}

QuantizerGrads quantize_backward(std::span<const double> upstream,
                                 std::span<const double> x,
                                 const QuantizerState& q) {
  const std::size_t n = q.size();
  if (n == 0 || x.size() % n != 0 || upstream.size() != x.size()) {
    throw ShapeError("quantize_backward: mismatched tensor sizes");
  }
  QuantizerGrads g{std::vector<double>(x.size()),
                   std::vector<double>(n, 0.0)};
  if (!q.enabled) {
    std::copy(upstream.begin(), upstream.end(), g.grad_x.begin());
    return g;
  }
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t e = k % n;
    const FxpFormat fmt = q.format(e);
    const double qx = quantize_value(x[k], fmt, q.mode, q.rounding);
    g.grad_x[k] = quantize_grad_x(upstream[k], x[k], fmt, q.mode, q.rounding);
    g.grad_f_raw[e] += quantize_grad_f(upstream[k], x[k], qx);
  }
  return g;
}

void calibrate_element(QuantizerState& q, std::size_t e, double max_abs,
                       double min_value) {
  const double s = std::ldexp(1.0, -q.frac(e));
  const auto need = static_cast<int>(std::ceil(std::log2(max_abs + s)));
  if (need > q.i_cal[e]) q.i_cal[e] = need;
  if (min_value < 0.0) q.is_signed[e] = 1;
}

void calibrate(std::span<const double> x, QuantizerState& q) {
  const std::size_t n = q.size();
  if (n == 0 || x.size() % n != 0) {
    throw ShapeError("calibrate: tensor size is not a multiple of quantizer size");
  }
  std::vector<double> max_abs(n, 0.0);
  std::vector<double> min_v(n, 0.0);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const std::size_t e = k % n;
    max_abs[e] = std::max(max_abs[e], std::abs(x[k]));
    min_v[e] = std::min(min_v[e], x[k]);
  }
  for (std::size_t e = 0; e < n; ++e) calibrate_element(q, e, max_abs[e], min_v[e]);
  q.calibrated = true;
}

}  // namespace lutforge
