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

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "lutforge/layers.hpp"

namespace lutforge {

enum class Task { kClassification, kRegression };

std::string_view to_string(Task t);
Task parse_task(std::string_view s);

/// Sequential chain of layers behind a fixed input quantizer.
///
/// The input quantizer is element-wise over the flattened per-sample input,
/// SAT/RND with a fixed fractional width; its calibrated formats become the
/// input wire formats of the compiled program.
class Model {
 public:
  Model() = default;
  explicit Model(Shape input_shape, int input_frac_bits = 6);

  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const Shape& input_shape() const noexcept { return input_shape_; }
  // Shape after the last layer (per sample).
  Shape output_shape() const;
  std::size_t n_inputs() const { return shape_size(input_shape_); }
  std::size_t n_outputs() const { return shape_size(output_shape()); }

  LutDenseLayer& add_lut_dense(std::size_t c_out, const LutDenseOptions& opts,
                               std::mt19937_64& rng);
  LutConvLayer& add_lut_conv(std::size_t c_out, ConvOptions conv,
                             const LutDenseOptions& opts, std::mt19937_64& rng);
  QDenseLayer& add_qdense(std::size_t c_out, const QDenseOptions& opts,
                          std::mt19937_64& rng);
  FlattenLayer& add_flatten();
  // Takes ownership; the layer's input shape must match the current output.
  Layer& add_layer(std::unique_ptr<Layer> layer);

  Tensor quantize_input(const Tensor& x) const;
  Tensor forward_train(const Tensor& x);
  Tensor forward_eval(const Tensor& x) const;
  // Back-propagates through every layer; the input gradient is discarded.
  void backward(const Tensor& upstream);

  std::vector<ParamRef> params();
  void zero_grad();
  // Off means float mode: every quantizer, including the input one, passes
  // values through.
  void set_quantizers_enabled(bool enabled);

  const std::vector<std::unique_ptr<Layer>>& layers() const noexcept {
    return layers_;
  }
  std::vector<std::unique_ptr<Layer>>& layers() noexcept { return layers_; }

  QuantizerState input_quantizer;
  Task task = Task::kClassification;
  std::uint64_t seed = 0;
  std::string config_hash;

 private:
  Shape input_shape_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace lutforge
