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

#include "lutforge/layers.hpp"

#include <algorithm>
#include <cmath>

#include "lutforge/error.hpp"

namespace lutforge {

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "(";
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k != 0) s += ", ";
    s += std::to_string(shape[k]);
  }
  return s + ")";
}

Tensor::Tensor(Shape s, std::vector<double> d)
    : shape(std::move(s)), data(std::move(d)) {
  if (data.size() != shape_size(shape)) {
    throw ShapeError("tensor data size " + std::to_string(data.size()) +
                     " does not match shape " + shape_string(shape));
  }
}

std::string_view to_string(LayerKind k) {
  switch (k) {
    case LayerKind::kLutDense: return "lut_dense";
    case LayerKind::kLutConv: return "lut_conv";
    case LayerKind::kQDense: return "qdense";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

std::string_view to_string(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

std::string_view to_string(Padding p) {
  return p == Padding::kValid ? "valid" : "same";
}

Activation parse_activation(std::string_view s) {
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw DataError("unknown activation '" + std::string(s) + "'");
}

Padding parse_padding(std::string_view s) {
  if (s == "valid") return Padding::kValid;
  if (s == "same") return Padding::kSame;
  throw DataError("unknown padding '" + std::string(s) + "'");
}

void Layer::check_input(const Tensor& x, const char* who) const {
  if (x.rank() != in_shape_.size() + 1 ||
      !std::equal(in_shape_.begin(), in_shape_.end(), x.shape.begin() + 1)) {
    throw ShapeError(std::string(who) + ": expected per-sample shape " +
                     shape_string(in_shape_) + ", got tensor " +
                     shape_string(x.shape));
  }
}

namespace {

Shape replace_last(Shape s, std::size_t last) {
  s.back() = last;
  return s;
}

void require_calibrated(const QuantizerState& q, const char* what) {
  if (q.enabled && !q.calibrated) {
    throw UsageError(std::string(what) +
                     " quantizer is uncalibrated; run a training-mode pass "
                     "before eval");
  }
}

std::vector<FxpFormat> formats(const QuantizerState& q) {
  std::vector<FxpFormat> f(q.size());
  for (std::size_t e = 0; e < q.size(); ++e) f[e] = q.format(e);
  return f;
}

void push_quantizer(std::vector<ParamRef>& out, const std::string& name,
                    QuantizerState& q) {
  if (!q.enabled || !q.trainable) return;
  if (q.f_grad.size() != q.f_raw.size()) q.f_grad.assign(q.f_raw.size(), 0.0);
  out.push_back({name, q.f_raw, q.f_grad});
}

}  // namespace

// ---------------------------------------------------------------------------
// LUT-Dense

LutDenseLayer::LutDenseLayer(Shape in_shape, std::size_t c_out,
                             const LutDenseOptions& opts)
    : Layer(std::move(in_shape)),
      activation(opts.activation),
      c_out_(c_out),
      hidden_(opts.hidden) {
  if (in_shape_.empty() || in_shape_.back() == 0 || c_out == 0 ||
      hidden_ == 0) {
    throw ShapeError("lut_dense: c_in, c_out and hidden must be positive");
  }
  c_in_ = in_shape_.back();
  const std::size_t n = n_lluts();
  w0.assign(n * hidden_, 0.0);
  b0.assign(n * hidden_, 0.0);
  w1.assign(n * hidden_, 0.0);
  b1.assign(n, 0.0);
  q_in = QuantizerState(n, OverflowMode::kWrap, RoundMode::kTrn, opts.init_f);
  q_out = QuantizerState(n, OverflowMode::kSat, RoundMode::kRnd, opts.init_f);
  if (opts.use_batchnorm) bn.emplace(n);
  zero_grad();
}

LutDenseLayer::LutDenseLayer(Shape in_shape, std::size_t c_out,
                             const LutDenseOptions& opts, std::mt19937_64& rng)
    : LutDenseLayer(std::move(in_shape), c_out, opts) {
  std::uniform_real_distribution<double> hidden_init(-1.0, 1.0);
  const double lim = 1.0 / std::sqrt(static_cast<double>(hidden_));
  std::uniform_real_distribution<double> out_init(-lim, lim);
  for (double& w : w0) w = hidden_init(rng);
  for (double& w : w1) w = out_init(rng);
}

std::unique_ptr<Layer> LutDenseLayer::clone() const {
  auto copy = std::make_unique<LutDenseLayer>(*this);
  copy->cache_.reset();
  return copy;
}

Shape LutDenseLayer::output_shape() const { return replace_last(in_shape_, c_out_); }

std::size_t LutDenseLayer::positions() const {
  return shape_size(in_shape_) / c_in_;
}

bool LutDenseLayer::pruned(std::size_t e) const {
  return (q_in.enabled && q_in.width(e) == 0) ||
         (q_out.enabled && q_out.width(e) == 0);
}

LutDenseLayer::FoldedOutput LutDenseLayer::folded_output() const {
  FoldedOutput f{w1, b1};
  if (!bn) return f;
  for (std::size_t e = 0; e < n_lluts(); ++e) {
    const double scale = bn->scale(e);
    for (std::size_t k = 0; k < hidden_; ++k) f.w1[e * hidden_ + k] *= scale;
    f.b1[e] = b1[e] * scale + bn->shift(e);
  }
  return f;
}

double LutDenseLayer::eval_llut(std::size_t e, double xq,
                                const FoldedOutput& folded) const {
  const std::size_t o = e * hidden_;
  return llut_mlp(&w0[o], &b0[o], &folded.w1[o], folded.b1[e], hidden_,
                  activation, xq);
}

Tensor LutDenseLayer::forward_train(const Tensor& x) {
  check_input(x, "lut_dense");
  const std::size_t n = n_lluts();
  const std::size_t rows = x.size() / c_in_;

  if (q_in.enabled) {
    for (std::size_t j = 0; j < c_in_; ++j) {
      double max_abs = 0.0;
      double min_v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double v = x.data[r * c_in_ + j];
        max_abs = std::max(max_abs, std::abs(v));
        min_v = std::min(min_v, v);
      }
      for (std::size_t i = 0; i < c_out_; ++i) {
        calibrate_element(q_in, element(j, i), max_abs, min_v);
      }
    }
    q_in.calibrated = true;
  }

  Cache c;
  c.rows = rows;
  c.x = x.data;
  c.xq.assign(rows * n, 0.0);
  c.act.assign(rows * n * hidden_, 0.0);
  c.y.assign(rows * n, 0.0);
  c.live.assign(n, 1);

  const auto fmt_in = formats(q_in);
  for (std::size_t e = 0; e < n; ++e) {
    c.live[e] = (q_in.enabled && fmt_in[e].width() == 0) ? 0 : 1;
  }

  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c_in_; ++j) {
      const double v = x.data[r * c_in_ + j];
      for (std::size_t i = 0; i < c_out_; ++i) {
        const std::size_t e = element(j, i);
        if (!c.live[e]) continue;
        const double xq =
            q_in.enabled ? quantize_value(v, fmt_in[e], q_in.mode, q_in.rounding)
                         : v;
        c.xq[r * n + e] = xq;
        double* a = &c.act[(r * n + e) * hidden_];
        double y = 0.0;
        for (std::size_t k = 0; k < hidden_; ++k) {
          const std::size_t o = e * hidden_ + k;
          a[k] = activate(activation, w0[o] * xq + b0[o]);
          y += w1[o] * a[k];
        }
        c.y[r * n + e] = y + b1[e];
      }
    }
  }

  if (bn) {
    c.xhat.assign(rows * n, 0.0);
    c.inv_std.assign(n, 0.0);
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      double mean = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mean += c.y[r * n + e];
      mean /= static_cast<double>(rows);
      double var = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double d = c.y[r * n + e] - mean;
        var += d * d;
      }
      var /= static_cast<double>(rows);
      const double inv_std = 1.0 / std::sqrt(var + bn->eps);
      c.inv_std[e] = inv_std;
      for (std::size_t r = 0; r < rows; ++r) {
        const double xh = (c.y[r * n + e] - mean) * inv_std;
        c.xhat[r * n + e] = xh;
        c.y[r * n + e] = bn->gamma[e] * xh + bn->beta[e];
      }
      bn->running_mean[e] =
          bn->momentum * bn->running_mean[e] + (1.0 - bn->momentum) * mean;
      bn->running_var[e] =
          bn->momentum * bn->running_var[e] + (1.0 - bn->momentum) * var;
    }
    bn->populated = true;
  }

  if (q_out.enabled) {
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      double max_abs = 0.0;
      double min_v = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        const double v = c.y[r * n + e];
        max_abs = std::max(max_abs, std::abs(v));
        min_v = std::min(min_v, v);
      }
      calibrate_element(q_out, e, max_abs, min_v);
    }
    q_out.calibrated = true;
  }

  const auto fmt_out = formats(q_out);
  Tensor out(replace_last(x.shape, c_out_));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      const double y = c.y[r * n + e];
      const double yq = q_out.enabled ? quantize_value(y, fmt_out[e], q_out.mode,
                                                       q_out.rounding)
                                      : y;
      out.data[r * c_out_ + e % c_out_] += yq;
    }
  }
  cache_ = std::move(c);
  return out;
}

Tensor LutDenseLayer::forward_eval(const Tensor& x) const {
  check_input(x, "lut_dense");
  require_calibrated(q_in, "lut_dense input");
  require_calibrated(q_out, "lut_dense output");
  const std::size_t rows = x.size() / c_in_;
  const FoldedOutput folded = folded_output();
  const auto fmt_in = formats(q_in);
  const auto fmt_out = formats(q_out);
  std::vector<std::uint8_t> live(n_lluts());
  for (std::size_t e = 0; e < n_lluts(); ++e) live[e] = pruned(e) ? 0 : 1;

  Tensor out(replace_last(x.shape, c_out_));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < c_in_; ++j) {
      const double v = x.data[r * c_in_ + j];
      for (std::size_t i = 0; i < c_out_; ++i) {
        const std::size_t e = element(j, i);
        if (!live[e]) continue;
        const double xq =
            q_in.enabled ? quantize_value(v, fmt_in[e], q_in.mode, q_in.rounding)
                         : v;
        const double y = eval_llut(e, xq, folded);
        out.data[r * c_out_ + i] +=
            q_out.enabled
                ? quantize_value(y, fmt_out[e], q_out.mode, q_out.rounding)
                : y;
      }
    }
  }
  return out;
}

Tensor LutDenseLayer::backward(const Tensor& upstream) {
  if (!cache_) {
    throw UsageError("lut_dense: backward called without a training-mode forward");
  }
  const Cache& c = *cache_;
  const std::size_t n = n_lluts();
  const std::size_t rows = c.rows;
  if (upstream.size() != rows * c_out_) {
    throw ShapeError("lut_dense: upstream gradient has wrong size");
  }
  const auto fmt_in = formats(q_in);
  const auto fmt_out = formats(q_out);
  if (q_in.f_grad.size() != n) q_in.f_grad.assign(n, 0.0);
  if (q_out.f_grad.size() != n) q_out.f_grad.assign(n, 0.0);

  std::vector<double> dy(rows * n, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      double d = upstream.data[r * c_out_ + e % c_out_];
      if (q_out.enabled) {
        const double y = c.y[r * n + e];
        const double yq = quantize_value(y, fmt_out[e], q_out.mode, q_out.rounding);
        q_out.f_grad[e] += quantize_grad_f(d, y, yq);
        d = quantize_grad_x(d, y, fmt_out[e], q_out.mode, q_out.rounding);
      }
      dy[r * n + e] = d;
    }
  }

  if (bn) {
    const auto R = static_cast<double>(rows);
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (std::size_t r = 0; r < rows; ++r) {
        sum_d += dy[r * n + e];
        sum_dx += dy[r * n + e] * c.xhat[r * n + e];
      }
      g_gamma[e] += sum_dx;
      g_beta[e] += sum_d;
      const double g = bn->gamma[e];
      for (std::size_t r = 0; r < rows; ++r) {
        const double dxhat = dy[r * n + e] * g;
        dy[r * n + e] = c.inv_std[e] / R *
                        (R * dxhat - g * sum_d - c.xhat[r * n + e] * g * sum_dx);
      }
    }
  }

  Tensor dx(Shape{rows, c_in_});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t e = 0; e < n; ++e) {
      if (!c.live[e]) continue;
      const double d = dy[r * n + e];
      const std::size_t j = e / c_out_;
      const double* a = &c.act[(r * n + e) * hidden_];
      g_b1[e] += d;
      double dxq = 0.0;
      for (std::size_t k = 0; k < hidden_; ++k) {
        const std::size_t o = e * hidden_ + k;
        g_w1[o] += d * a[k];
        const double dz = d * w1[o] * activate_grad(activation, a[k]);
        g_w0[o] += dz * c.xq[r * n + e];
        g_b0[o] += dz;
        dxq += dz * w0[o];
      }
      const double v = c.x[r * c_in_ + j];
      if (q_in.enabled) {
        q_in.f_grad[e] += quantize_grad_f(dxq, v, c.xq[r * n + e]);
        dxq = quantize_grad_x(dxq, v, fmt_in[e], q_in.mode, q_in.rounding);
      }
      dx.data[r * c_in_ + j] += dxq;
    }
  }
  Shape in_full{upstream.shape};
  in_full.back() = c_in_;
  dx.shape = std::move(in_full);
  return dx;
}

void LutDenseLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({"w0", w0, g_w0});
  out.push_back({"b0", b0, g_b0});
  out.push_back({"w1", w1, g_w1});
  out.push_back({"b1", b1, g_b1});
  if (bn) {
    out.push_back({"bn.gamma", bn->gamma, g_gamma});
    out.push_back({"bn.beta", bn->beta, g_beta});
  }
  push_quantizer(out, "q_in.f", q_in);
  push_quantizer(out, "q_out.f", q_out);
}

void LutDenseLayer::zero_grad() {
  g_w0.assign(w0.size(), 0.0);
  g_b0.assign(b0.size(), 0.0);
  g_w1.assign(w1.size(), 0.0);
  g_b1.assign(b1.size(), 0.0);
  if (bn) {
    g_gamma.assign(bn->gamma.size(), 0.0);
    g_beta.assign(bn->beta.size(), 0.0);
  }
  q_in.zero_grad();
  q_out.zero_grad();
}

void LutDenseLayer::set_quantizers_enabled(bool enabled) {
  q_in.enabled = enabled;
  q_out.enabled = enabled;
}

LutDenseLayer fold_batchnorm(const LutDenseLayer& layer) {
  LutDenseLayer out = layer;
  if (!layer.bn) return out;
  if (!layer.bn->populated) {
    throw UsageError("fold_batchnorm: running statistics were never populated");
  }
  auto folded = layer.folded_output();
  out.w1 = std::move(folded.w1);
  out.b1 = std::move(folded.b1);
  out.bn.reset();
  out.g_gamma.clear();
  out.g_beta.clear();
  out.zero_grad();
  return out;
}

// ---------------------------------------------------------------------------
// im2col + LUT-Conv

Im2Col make_im2col(const Shape& in_shape, const ConvOptions& opts) {
  if (in_shape.size() < 2 || in_shape.size() > 3) {
    throw ShapeError("lut_conv: input must be (length, channels) or "
                     "(height, width, channels), got " +
                     shape_string(in_shape));
  }
  const std::size_t rank = in_shape.size() - 1;
  const std::size_t channels = in_shape.back();
  if (opts.kernel.size() != rank) {
    throw ShapeError("lut_conv: kernel rank does not match spatial rank");
  }
  std::vector<std::size_t> stride = opts.stride;
  if (stride.empty()) stride.assign(rank, 1);
  if (stride.size() != rank) {
    throw ShapeError("lut_conv: stride rank does not match spatial rank");
  }

  Im2Col cols;
  std::vector<long> pad_before(rank, 0);
  for (std::size_t d = 0; d < rank; ++d) {
    const std::size_t len = in_shape[d];
    const std::size_t k = opts.kernel[d];
    const std::size_t s = stride[d];
    if (k == 0 || s == 0) throw ShapeError("lut_conv: kernel and stride must be positive");
    std::size_t out = 0;
    if (opts.padding == Padding::kValid) {
      if (k > len) {
        throw ShapeError("lut_conv: kernel " + std::to_string(k) +
                         " is larger than the input extent " +
                         std::to_string(len));
      }
      out = (len - k) / s + 1;
    } else {
      out = (len + s - 1) / s;
      const long total = std::max<long>(
          static_cast<long>((out - 1) * s + k) - static_cast<long>(len), 0);
      pad_before[d] = total / 2;
    }
    cols.out_spatial.push_back(out);
  }
  cols.positions = shape_size(cols.out_spatial);
  cols.patch = shape_size(opts.kernel) * channels;
  cols.source.assign(cols.positions * cols.patch, -1);

  const std::size_t kvol = shape_size(opts.kernel);
  std::vector<std::size_t> p_idx(rank), k_idx(rank);
  for (std::size_t p = 0; p < cols.positions; ++p) {
    std::size_t rem = p;
    for (std::size_t d = rank; d-- > 0;) {
      p_idx[d] = rem % cols.out_spatial[d];
      rem /= cols.out_spatial[d];
    }
    for (std::size_t q = 0; q < kvol; ++q) {
      std::size_t krem = q;
      for (std::size_t d = rank; d-- > 0;) {
        k_idx[d] = krem % opts.kernel[d];
        krem /= opts.kernel[d];
      }
      long flat = 0;
      bool inside = true;
      for (std::size_t d = 0; d < rank; ++d) {
        const long coord = static_cast<long>(p_idx[d] * stride[d] + k_idx[d]) -
                           pad_before[d];
        if (coord < 0 || coord >= static_cast<long>(in_shape[d])) inside = false;
        flat = flat * static_cast<long>(in_shape[d]) + coord;
      }
      for (std::size_t ch = 0; ch < channels; ++ch) {
        cols.source[p * cols.patch + q * channels + ch] =
            inside ? flat * static_cast<long>(channels) + static_cast<long>(ch)
                   : -1;
      }
    }
  }
  return cols;
}

namespace {

ConvOptions normalized(ConvOptions c) {
  if (c.stride.empty()) c.stride.assign(c.kernel.size(), 1);
  return c;
}

}  // namespace

LutConvLayer::LutConvLayer(Shape in_shape, std::size_t c_out, ConvOptions conv,
                           const LutDenseOptions& opts)
    : Layer(in_shape),
      inner(Shape{make_im2col(in_shape, conv).positions,
                  make_im2col(in_shape, conv).patch},
            c_out, opts),
      conv_(normalized(std::move(conv))),
      cols_(make_im2col(in_shape_, conv_)) {}

LutConvLayer::LutConvLayer(Shape in_shape, std::size_t c_out, ConvOptions conv,
                           const LutDenseOptions& opts, std::mt19937_64& rng)
    : Layer(in_shape),
      inner(Shape{make_im2col(in_shape, conv).positions,
                  make_im2col(in_shape, conv).patch},
            c_out, opts, rng),
      conv_(normalized(std::move(conv))),
      cols_(make_im2col(in_shape_, conv_)) {}

std::unique_ptr<Layer> LutConvLayer::clone() const {
  auto copy = std::make_unique<LutConvLayer>(*this);
  copy->cached_batch_.reset();
  return copy;
}

Shape LutConvLayer::output_shape() const {
  Shape s = cols_.out_spatial;
  s.push_back(inner.c_out());
  return s;
}

Tensor LutConvLayer::extract_patches(const Tensor& x) const {
  check_input(x, "lut_conv");
  const std::size_t batch = x.batch();
  const std::size_t sample = shape_size(in_shape_);
  Tensor patches(Shape{batch, cols_.positions, cols_.patch});
  const std::size_t per = cols_.positions * cols_.patch;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < per; ++k) {
      const long src = cols_.source[k];
      if (src >= 0) patches.data[b * per + k] = x.data[b * sample + static_cast<std::size_t>(src)];
    }
  }
  return patches;
}

Tensor LutConvLayer::forward_train(const Tensor& x) {
  Tensor y = inner.forward_train(extract_patches(x));
  cached_batch_ = x.batch();
  Shape s{x.batch()};
  for (std::size_t d : output_shape()) s.push_back(d);
  y.shape = std::move(s);
  return y;
}

Tensor LutConvLayer::forward_eval(const Tensor& x) const {
  Tensor y = inner.forward_eval(extract_patches(x));
  Shape s{x.batch()};
  for (std::size_t d : output_shape()) s.push_back(d);
  y.shape = std::move(s);
  return y;
}

Tensor LutConvLayer::backward(const Tensor& upstream) {
  if (!cached_batch_) {
    throw UsageError("lut_conv: backward called without a training-mode forward");
  }
  const std::size_t batch = *cached_batch_;
  Tensor up(Shape{batch, cols_.positions, inner.c_out()}, upstream.data);
  const Tensor dpatch = inner.backward(up);
  Shape s{batch};
  for (std::size_t d : in_shape_) s.push_back(d);
  Tensor dx(s);
  const std::size_t sample = shape_size(in_shape_);
  const std::size_t per = cols_.positions * cols_.patch;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t k = 0; k < per; ++k) {
      const long src = cols_.source[k];
      if (src >= 0) dx.data[b * sample + static_cast<std::size_t>(src)] += dpatch.data[b * per + k];
    }
  }
  return dx;
}

void LutConvLayer::collect_params(std::vector<ParamRef>& out) {
  inner.collect_params(out);
}

// ---------------------------------------------------------------------------
// Quantized matmul dense

QDenseLayer::QDenseLayer(Shape in_shape, std::size_t c_out,
                         const QDenseOptions& opts)
    : Layer(std::move(in_shape)), c_out_(c_out) {
  if (in_shape_.empty() || in_shape_.back() == 0 || c_out == 0) {
    throw ShapeError("qdense: c_in and c_out must be positive");
  }
  c_in_ = in_shape_.back();
  weights.assign(c_in_ * c_out_, 0.0);
  bias.assign(c_out_, 0.0);
  q_w = QuantizerState(c_in_ * c_out_, OverflowMode::kSat, RoundMode::kRnd, opts.init_f);
  q_b = QuantizerState(c_out_, OverflowMode::kSat, RoundMode::kRnd, opts.init_f);
  q_act = QuantizerState(c_in_, opts.act_mode, RoundMode::kTrn, opts.init_f);
  zero_grad();
}

QDenseLayer::QDenseLayer(Shape in_shape, std::size_t c_out,
                         const QDenseOptions& opts, std::mt19937_64& rng)
    : QDenseLayer(std::move(in_shape), c_out, opts) {
  const double lim = std::sqrt(6.0 / static_cast<double>(c_in_ + c_out_));
  std::uniform_real_distribution<double> init(-lim, lim);
  for (double& w : weights) w = init(rng);
}

std::unique_ptr<Layer> QDenseLayer::clone() const {
  auto copy = std::make_unique<QDenseLayer>(*this);
  copy->cache_.reset();
  return copy;
}

Shape QDenseLayer::output_shape() const { return replace_last(in_shape_, c_out_); }

std::vector<double> QDenseLayer::quantized_weights() const {
  return quantize(weights, q_w);
}

std::vector<double> QDenseLayer::quantized_bias() const {
  return quantize(bias, q_b);
}

namespace {

Tensor qdense_apply(const Tensor& x, std::span<const double> xq,
                    std::span<const double> wq, std::span<const double> bq,
                    std::size_t c_in, std::size_t c_out) {
  Tensor y(replace_last(x.shape, c_out));
  const std::size_t rows = x.size() / c_in;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < c_out; ++o) {
      double acc = 0.0;
      for (std::size_t j = 0; j < c_in; ++j) acc += xq[r * c_in + j] * wq[j * c_out + o];
      y.data[r * c_out + o] = acc + bq[o];
    }
  }
  return y;
}

}  // namespace

Tensor QDenseLayer::forward_train(const Tensor& x) {
  check_input(x, "qdense");
  if (q_act.enabled) calibrate(x.data, q_act);
  if (q_w.enabled) calibrate(weights, q_w);
  if (q_b.enabled) calibrate(bias, q_b);
  Cache c;
  c.rows = x.size() / c_in_;
  c.x = x.data;
  c.xq = quantize(x.data, q_act);
  c.wq = quantized_weights();
  c.bq = quantized_bias();
  Tensor y = qdense_apply(x, c.xq, c.wq, c.bq, c_in_, c_out_);
  cache_ = std::move(c);
  return y;
}

Tensor QDenseLayer::forward_eval(const Tensor& x) const {
  check_input(x, "qdense");
  require_calibrated(q_act, "qdense activation");
  require_calibrated(q_w, "qdense weight");
  require_calibrated(q_b, "qdense bias");
  const auto xq = quantize(x.data, q_act);
  return qdense_apply(x, xq, quantized_weights(), quantized_bias(), c_in_, c_out_);
}

Tensor QDenseLayer::backward(const Tensor& upstream) {
  if (!cache_) {
    throw UsageError("qdense: backward called without a training-mode forward");
  }
  const Cache& c = *cache_;
  if (upstream.size() != c.rows * c_out_) {
    throw ShapeError("qdense: upstream gradient has wrong size");
  }
  std::vector<double> dxq(c.rows * c_in_, 0.0);
  std::vector<double> dwq(c_in_ * c_out_, 0.0);
  std::vector<double> dbq(c_out_, 0.0);
  for (std::size_t r = 0; r < c.rows; ++r) {
    for (std::size_t o = 0; o < c_out_; ++o) {
      const double d = upstream.data[r * c_out_ + o];
      dbq[o] += d;
      for (std::size_t j = 0; j < c_in_; ++j) {
        dxq[r * c_in_ + j] += d * c.wq[j * c_out_ + o];
        dwq[j * c_out_ + o] += d * c.xq[r * c_in_ + j];
      }
    }
  }
  const auto gw = quantize_backward(dwq, weights, q_w);
  const auto gb = quantize_backward(dbq, bias, q_b);
  const auto gx = quantize_backward(dxq, c.x, q_act);
  for (std::size_t k = 0; k < weights.size(); ++k) g_weights[k] += gw.grad_x[k];
  for (std::size_t k = 0; k < bias.size(); ++k) g_bias[k] += gb.grad_x[k];
  auto add_f = [](QuantizerState& q, const std::vector<double>& g) {
    if (!q.enabled) return;
    if (q.f_grad.size() != q.size()) q.f_grad.assign(q.size(), 0.0);
    for (std::size_t e = 0; e < g.size(); ++e) q.f_grad[e] += g[e];
  };
  add_f(q_w, gw.grad_f_raw);
  add_f(q_b, gb.grad_f_raw);
  add_f(q_act, gx.grad_f_raw);
  Shape s = upstream.shape;
  s.back() = c_in_;
  return Tensor(std::move(s), gx.grad_x);
}

void QDenseLayer::collect_params(std::vector<ParamRef>& out) {
  out.push_back({"weights", weights, g_weights});
  out.push_back({"bias", bias, g_bias});
  push_quantizer(out, "q_w.f", q_w);
  push_quantizer(out, "q_b.f", q_b);
  push_quantizer(out, "q_act.f", q_act);
}

void QDenseLayer::zero_grad() {
  g_weights.assign(weights.size(), 0.0);
  g_bias.assign(bias.size(), 0.0);
  q_w.zero_grad();
  q_b.zero_grad();
  q_act.zero_grad();
}

void QDenseLayer::set_quantizers_enabled(bool enabled) {
  q_w.enabled = enabled;
  q_b.enabled = enabled;
  q_act.enabled = enabled;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Layer> FlattenLayer::clone() const {
  return std::make_unique<FlattenLayer>(*this);
}

Tensor FlattenLayer::forward_eval(const Tensor& x) const {
  check_input(x, "flatten");
  return Tensor(Shape{x.batch(), shape_size(in_shape_)}, x.data);
}

Tensor FlattenLayer::backward(const Tensor& upstream) {
  Shape s{upstream.batch()};
  for (std::size_t d : in_shape_) s.push_back(d);
  return Tensor(std::move(s), upstream.data);
}

}  // namespace lutforge
