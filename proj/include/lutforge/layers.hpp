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

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lutforge/fxp.hpp"
#include "lutforge/tensor.hpp"

namespace lutforge {

enum class Mode { kTrain, kEval };
enum class LayerKind { kLutDense, kLutConv, kQDense, kFlatten };
enum class Activation { kTanh, kRelu };
enum class Padding { kValid, kSame };

std::string_view to_string(LayerKind k);
std::string_view to_string(Activation a);
std::string_view to_string(Padding p);
Activation parse_activation(std::string_view s);
Padding parse_padding(std::string_view s);

inline double activate(Activation act, double z) {
  return act == Activation::kTanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

// Derivative expressed through the activation output.
inline double activate_grad(Activation act, double a) {
  return act == Activation::kTanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0);
}

/// Scalar function realized by one L-LUT: a single-hidden-layer MLP on one
/// input. Table extraction repeats exactly this sequence of operations, so the
/// two paths agree bit for bit.
inline double llut_mlp(const double* w0, const double* b0, const double* w1,
                       double b1, std::size_t hidden, Activation act,
                       double x) {
  double y = 0.0;
  for (std::size_t k = 0; k < hidden; ++k) {
    y += w1[k] * activate(act, w0[k] * x + b0[k]);
  }
  return y + b1;
}

/// Mutable view of one trainable tensor and its gradient buffer.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
  // Multiplier on the optimizer learning rate for this tensor.
  double lr_scale = 1.0;
};

class Layer {
 public:
  explicit Layer(Shape in_shape) : in_shape_(std::move(in_shape)) {}
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  // Per-sample shapes (no batch axis).
  const Shape& input_shape() const noexcept { return in_shape_; }
  virtual Shape output_shape() const = 0;

  // Training mode updates calibration and normalization statistics and
  // caches what backward() needs.
  virtual Tensor forward_train(const Tensor& x) = 0;
  virtual Tensor forward_eval(const Tensor& x) const = 0;
  Tensor forward(const Tensor& x, Mode mode) {
    return mode == Mode::kTrain ? forward_train(x) : forward_eval(x);
  }

  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  virtual Tensor backward(const Tensor& upstream) = 0;

  virtual void collect_params(std::vector<ParamRef>& out) = 0;
  virtual void zero_grad() = 0;
  virtual void set_quantizers_enabled(bool enabled) = 0;

 protected:
  void check_input(const Tensor& x, const char* who) const;

  Shape in_shape_;
};

struct BatchNormState {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.9;
  double eps = 1e-3;
  // Set once running statistics have seen a batch.
  bool populated = false;

  BatchNormState() = default;
  explicit BatchNormState(std::size_t n)
      : gamma(n, 1.0), beta(n, 0.0), running_mean(n, 0.0), running_var(n, 1.0) {}

  // Eval-mode affine y -> scale * y + shift for element e.
  double scale(std::size_t e) const {
    return gamma[e] / std::sqrt(running_var[e] + eps);
  }
  double shift(std::size_t e) const {
    return beta[e] - gamma[e] * running_mean[e] / std::sqrt(running_var[e] + eps);
  }
};

struct LutDenseOptions {
  std::size_t hidden = 2;
  Activation activation = Activation::kTanh;
  bool use_batchnorm = false;
  double init_f = QuantizerState::kInitFrac;
};

/// Grid of c_in x c_out one-input L-LUTs, each a tiny MLP, reduced by summing
/// over the input axis. Element (j, i) of every per-L-LUT array lives at
/// j * c_out + i; hidden tensors append the hidden index k.
class LutDenseLayer final : public Layer {
 public:
  // Zero-initialized parameters.
  LutDenseLayer(Shape in_shape, std::size_t c_out, const LutDenseOptions& opts);
  // Fan-in initialization drawn from rng.
  LutDenseLayer(Shape in_shape, std::size_t c_out, const LutDenseOptions& opts,
                std::mt19937_64& rng);

  LayerKind kind() const override { return LayerKind::kLutDense; }
  std::unique_ptr<Layer> clone() const override;
  Shape output_shape() const override;

  Tensor forward_train(const Tensor& x) override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor backward(const Tensor& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void zero_grad() override;
  void set_quantizers_enabled(bool enabled) override;

  std::size_t c_in() const noexcept { return c_in_; }
  std::size_t c_out() const noexcept { return c_out_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t n_lluts() const noexcept { return c_in_ * c_out_; }
  // Number of positions the grid is replicated over (leading sample axes).
  std::size_t positions() const;
  std::size_t element(std::size_t j, std::size_t i) const noexcept {
    return j * c_out_ + i;
  }

  // A zero-width input or output quantizer removes the L-LUT entirely.
  bool pruned(std::size_t e) const;

  /// Output affine with eval-mode batch-norm absorbed: w1 (n_lluts x hidden)
  /// and b1 (n_lluts).
  struct FoldedOutput {
    std::vector<double> w1;
    std::vector<double> b1;
  };
  FoldedOutput folded_output() const;

  /// Eval-mode scalar function of L-LUT e on an already quantized input,
  /// before output quantization.
  double eval_llut(std::size_t e, double xq, const FoldedOutput& folded) const;

  Activation activation;
  std::vector<double> w0, b0, w1, b1;
  std::vector<double> g_w0, g_b0, g_w1, g_b1;
  QuantizerState q_in;   // WRAP / TRN
  QuantizerState q_out;  // SAT / RND
  std::optional<BatchNormState> bn;
  std::vector<double> g_gamma, g_beta;

 private:
  struct Cache {
    std::size_t rows = 0;
    std::vector<double> x;      // rows x c_in
    std::vector<double> xq;     // rows x E
    std::vector<double> act;    // rows x E x hidden
    std::vector<double> xhat;   // rows x E (batch-norm only)
    std::vector<double> inv_std;  // E (batch-norm only)
    std::vector<double> y;      // rows x E, input of q_out
    std::vector<std::uint8_t> live;  // E
  };

  std::size_t c_in_;
  std::size_t c_out_;
  std::size_t hidden_;
  std::optional<Cache> cache_;
};

/// Returns the layer with eval-mode batch-norm absorbed into each MLP's
/// output affine and batch-norm removed. Throws UsageError when running
/// statistics were never populated.
LutDenseLayer fold_batchnorm(const LutDenseLayer& layer);

struct ConvOptions {
  // One entry per spatial axis (1-D or 2-D).
  std::vector<std::size_t> kernel;
  std::vector<std::size_t> stride;
  Padding padding = Padding::kValid;
};

/// Patch extraction for a channels-last input. For output position p and
/// patch element j = kernel_offset * channels + c, source[p * patch + j] is
/// the flat per-sample input offset, or -1 for zero padding.
struct Im2Col {
  Shape out_spatial;
  std::size_t positions = 0;
  std::size_t patch = 0;
  std::vector<long> source;
};

Im2Col make_im2col(const Shape& in_shape, const ConvOptions& opts);

/// im2col followed by a LUT-Dense over each patch.
class LutConvLayer final : public Layer {
 public:
  LutConvLayer(Shape in_shape, std::size_t c_out, ConvOptions conv,
               const LutDenseOptions& opts);
  LutConvLayer(Shape in_shape, std::size_t c_out, ConvOptions conv,
               const LutDenseOptions& opts, std::mt19937_64& rng);

  LayerKind kind() const override { return LayerKind::kLutConv; }
  std::unique_ptr<Layer> clone() const override;
  Shape output_shape() const override;

  Tensor forward_train(const Tensor& x) override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor backward(const Tensor& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void zero_grad() override { inner.zero_grad(); }
  void set_quantizers_enabled(bool enabled) override {
    inner.set_quantizers_enabled(enabled);
  }

  const ConvOptions& conv() const noexcept { return conv_; }
  const Im2Col& im2col() const noexcept { return cols_; }
  Tensor extract_patches(const Tensor& x) const;

  LutDenseLayer inner;

 private:
  ConvOptions conv_;
  Im2Col cols_;
  std::optional<std::size_t> cached_batch_;
};

struct QDenseOptions {
  // Mode of the activation quantizer. SAT emits CLAMP; a layer fed by
  // L-LUT sums must use WRAP so no clamp lands on an L-LUT path.
  OverflowMode act_mode = OverflowMode::kSat;
  double init_f = QuantizerState::kInitFrac;
};

/// Matmul dense layer with quantized weights, bias and input activations.
class QDenseLayer final : public Layer {
 public:
  QDenseLayer(Shape in_shape, std::size_t c_out, const QDenseOptions& opts);
  QDenseLayer(Shape in_shape, std::size_t c_out, const QDenseOptions& opts,
              std::mt19937_64& rng);

  LayerKind kind() const override { return LayerKind::kQDense; }
  std::unique_ptr<Layer> clone() const override;
  Shape output_shape() const override;

  Tensor forward_train(const Tensor& x) override;
  Tensor forward_eval(const Tensor& x) const override;
  Tensor backward(const Tensor& upstream) override;
  void collect_params(std::vector<ParamRef>& out) override;
  void zero_grad() override;
  void set_quantizers_enabled(bool enabled) override;

  std::size_t c_in() const noexcept { return c_in_; }
  std::size_t c_out() const noexcept { return c_out_; }

  // Quantized constants as used by both eval forward and lowering.
  std::vector<double> quantized_weights() const;
  std::vector<double> quantized_bias() const;

  std::vector<double> weights;  // c_in x c_out
  std::vector<double> bias;     // c_out
  std::vector<double> g_weights, g_bias;
  QuantizerState q_w;    // SAT / RND, c_in x c_out
  QuantizerState q_b;    // SAT / RND, c_out
  QuantizerState q_act;  // act_mode / TRN, c_in

 private:
  struct Cache {
    std::vector<double> x, xq, wq, bq;
    std::size_t rows = 0;
  };
  std::size_t c_in_;
  std::size_t c_out_;
  std::optional<Cache> cache_;
};

class FlattenLayer final : public Layer {
 public:
  explicit FlattenLayer(Shape in_shape) : Layer(std::move(in_shape)) {}
  LayerKind kind() const override { return LayerKind::kFlatten; }
  std::unique_ptr<Layer> clone() const override;
  Shape output_shape() const override { return {shape_size(in_shape_)}; }
  Tensor forward_train(const Tensor& x) override { return forward_eval(x); }
  Tensor forward_eval(const Tensor& x) const override;
  Tensor backward(const Tensor& upstream) override;
  void collect_params(std::vector<ParamRef>&) override {}
  void zero_grad() override {}
  void set_quantizers_enabled(bool) override {}
};

}  // namespace lutforge
