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

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lutforge {

/// Two's complement (or unsigned) fixed-point format.
///
/// A value v is representable when v * 2^frac_bits is an integer that fits in
/// width() bits. int_bits and frac_bits may be negative; a width of zero is
/// the pruned format whose only value is 0.
struct FxpFormat {
  bool is_signed = false;
  int int_bits = 0;
  int frac_bits = 0;

  constexpr int width() const noexcept {
    const int w = int_bits + frac_bits + (is_signed ? 1 : 0);
    return w > 0 ? w : 0;
  }

  double step() const;
  double min_value() const;
  double max_value() const;

  // Raw (integer) bounds. Valid for width() <= 63, or 64 when signed.
  std::int64_t min_raw() const;
  std::int64_t max_raw() const;

  bool operator==(const FxpFormat&) const = default;
};

std::string to_string(const FxpFormat& fmt);

/// Smallest format with the given frac_bits whose raw range covers
/// [lo_raw, hi_raw]. Always at least one bit wide.
FxpFormat covering_format(__int128 lo_raw, __int128 hi_raw, int frac_bits);

/// Encode a representable value as a width()-bit pattern (two's complement for
/// signed formats). Throws EncodingError when v is not representable.
std::uint64_t to_bits(double v, const FxpFormat& fmt);

/// Decode a width()-bit pattern. Throws EncodingError when bits >= 2^width.
double from_bits(std::uint64_t bits, const FxpFormat& fmt);

/// Sign-extend (or zero-extend) the low width() bits of a pattern.
std::int64_t raw_from_bits(std::uint64_t bits, const FxpFormat& fmt);
std::uint64_t bits_from_raw(std::int64_t raw, const FxpFormat& fmt);

bool is_representable(double v, const FxpFormat& fmt);

enum class OverflowMode { kWrap, kSat };
enum class RoundMode { kTrn, kRnd };

std::string_view to_string(OverflowMode m);
std::string_view to_string(RoundMode m);
OverflowMode parse_overflow_mode(std::string_view s);
RoundMode parse_round_mode(std::string_view s);

/// Quantize one value. TRN floors, RND rounds half away from zero; WRAP
/// reduces modulo 2^w into the format window, SAT clamps to it.
double quantize_value(double x, const FxpFormat& fmt, OverflowMode mode,
                      RoundMode rounding);

/// Element-wise trainable quantizer. Element e owns a fractional-bit
/// parameter f_raw[e] (trained through a straight-through round), an integer
/// bit count i_cal[e] sized by range calibration, and a signedness flag.
struct QuantizerState {
  OverflowMode mode = OverflowMode::kWrap;
  RoundMode rounding = RoundMode::kTrn;
  std::vector<double> f_raw;
  std::vector<int> i_cal;
  std::vector<std::uint8_t> is_signed;
  int min_f = -8;
  int max_f = 12;
  // Disabled quantizers pass values through unchanged (float mode).
  bool enabled = true;
  // Non-trainable quantizers keep f_raw fixed; the trainer skips them.
  bool trainable = true;
  bool calibrated = false;

  // Gradient accumulator for f_raw; not part of the serialized state.
  std::vector<double> f_grad;

  static constexpr double kInitFrac = 6.0;

  QuantizerState() = default;
  QuantizerState(std::size_t n, OverflowMode mode, RoundMode rounding,
                 double init_f = kInitFrac);

  std::size_t size() const noexcept { return f_raw.size(); }
  int frac(std::size_t e) const;
  FxpFormat format(std::size_t e) const;
  int width(std::size_t e) const { return format(e).width(); }

  /// Continuous width used by the resource surrogate:
  /// max(0, i + clamp(f_raw) + signed).
  double soft_width(std::size_t e) const;
  /// d soft_width / d f_raw (0 or 1).
  double soft_width_grad(std::size_t e) const;

  void zero_grad();
};

/// out[r*E + e] = quantize(x[r*E + e]) with element e's format, E = q.size().
void quantize(std::span<const double> x, const QuantizerState& q,
              std::span<double> out);
std::vector<double> quantize(std::span<const double> x,
                             const QuantizerState& q);

struct QuantizerGrads {
  std::vector<double> grad_x;
  // Summed over rows; one entry per quantizer element.
  std::vector<double> grad_f_raw;
};

/// Straight-through backward. SAT masks the gradient where the value was
/// clamped; WRAP passes it unmasked. The f_raw data term is
/// upstream * ln2 * (x - q(x)).
QuantizerGrads quantize_backward(std::span<const double> upstream,
                                 std::span<const double> x,
                                 const QuantizerState& q);

/// Per-element gradient pieces, used by layers that quantize inline.
double quantize_grad_x(double upstream, double x, const FxpFormat& fmt,
                       OverflowMode mode, RoundMode rounding);
double quantize_grad_f(double upstream, double x, double qx);

/// Grow i_cal (and signedness) so that every row of x fits; x has shape
/// (rows, q.size()).
void calibrate(std::span<const double> x, QuantizerState& q);

/// Update one element from observed statistics.
void calibrate_element(QuantizerState& q, std::size_t e, double max_abs,
                       double min_value);

}  // namespace lutforge
