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

#include "lutforge/model.hpp"

#include "lutforge/error.hpp"

namespace lutforge {

std::string_view to_string(Task t) {
  return t == Task::kClassification ? "classification" : "regression";
}

Task parse_task(std::string_view s) {
  if (s == "classification") return Task::kClassification;
  if (s == "regression") return Task::kRegression;
  throw DataError("unknown task '" + std::string(s) + "'");
}

Model::Model(Shape input_shape, int input_frac_bits)
    : input_quantizer(shape_size(input_shape), OverflowMode::kSat,
                      RoundMode::kRnd, input_frac_bits),
      input_shape_(std::move(input_shape)) {
  if (input_shape_.empty() || shape_size(input_shape_) == 0) {
    throw ShapeError("model input shape must be non-empty");
  }
  input_quantizer.trainable = false;
}

Model::Model(const Model& other)
    : input_quantizer(other.input_quantizer),
      task(other.task),
      seed(other.seed),
      config_hash(other.config_hash),
      input_shape_(other.input_shape_) {
  layers_.reserve(other.layers_.size());
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

Shape Model::output_shape() const {
  return layers_.empty() ? input_shape_ : layers_.back()->output_shape();
}

Layer& Model::add_layer(std::unique_ptr<Layer> layer) {
  if (layer->input_shape() != output_shape()) {
    throw ShapeError("layer expects input " + shape_string(layer->input_shape()) +
                     " but the model produces " + shape_string(output_shape()));
  }
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

LutDenseLayer& Model::add_lut_dense(std::size_t c_out,
                                    const LutDenseOptions& opts,
                                    std::mt19937_64& rng) {
  return static_cast<LutDenseLayer&>(
      add_layer(std::make_unique<LutDenseLayer>(output_shape(), c_out, opts, rng)));
}

LutConvLayer& Model::add_lut_conv(std::size_t c_out, ConvOptions conv,
                                  const LutDenseOptions& opts,
                                  std::mt19937_64& rng) {
  return static_cast<LutConvLayer&>(add_layer(std::make_unique<LutConvLayer>(
      output_shape(), c_out, std::move(conv), opts, rng)));
}

QDenseLayer& Model::add_qdense(std::size_t c_out, const QDenseOptions& opts,
                               std::mt19937_64& rng) {
  return static_cast<QDenseLayer&>(
      add_layer(std::make_unique<QDenseLayer>(output_shape(), c_out, opts, rng)));
}

FlattenLayer& Model::add_flatten() {
  return static_cast<FlattenLayer&>(
      add_layer(std::make_unique<FlattenLayer>(output_shape())));
}

Tensor Model::quantize_input(const Tensor& x) const {
  if (x.rank() != input_shape_.size() + 1 || x.sample_shape() != input_shape_) {
    throw ShapeError("model expects per-sample shape " +
                     shape_string(input_shape_) + ", got tensor " +
                     shape_string(x.shape));
  }
  if (input_quantizer.enabled && !input_quantizer.calibrated) {
    throw UsageError("input quantizer is uncalibrated; run a training-mode pass first");
  }
  return Tensor(x.shape, quantize(x.data, input_quantizer));
}

Tensor Model::forward_train(const Tensor& x) {
  if (input_quantizer.enabled) calibrate(x.data, input_quantizer);
  Tensor h = quantize_input(x);
  for (auto& l : layers_) h = l->forward_train(h);
  return h;
}

Tensor Model::forward_eval(const Tensor& x) const {
  Tensor h = quantize_input(x);
  for (const auto& l : layers_) h = l->forward_eval(h);
  return h;
}

void Model::backward(const Tensor& upstream) {
  Tensor g = upstream;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    g = (*it)->backward(g);
  }
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const std::size_t first = out.size();
    layers_[k]->collect_params(out);
    for (std::size_t p = first; p < out.size(); ++p) {
      out[p].name = "layer" + std::to_string(k) + "." + out[p].name;
    }
  }
  return out;
}

void Model::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

void Model::set_quantizers_enabled(bool enabled) {
  input_quantizer.enabled = enabled;
  for (auto& l : layers_) l->set_quantizers_enabled(enabled);
}

}  // namespace lutforge
