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
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace lutforge {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_string(std::span<const std::size_t> shape);

/// Dense row-major tensor of doubles. The first axis is the batch axis.
struct Tensor {
  Shape shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<double> d);

  std::size_t size() const noexcept { return data.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t batch() const { return shape.empty() ? 0 : shape.front(); }
  // Size of the trailing axis and number of rows in front of it.
  std::size_t trailing() const { return shape.empty() ? 0 : shape.back(); }
  std::size_t rows() const {
    return trailing() == 0 ? 0 : data.size() / trailing();
  }
  // Per-sample shape (everything after the batch axis).
  Shape sample_shape() const { return Shape(shape.begin() + 1, shape.end()); }

  std::span<double> row(std::size_t r) {
    return {data.data() + r * trailing(), trailing()};
  }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * trailing(), trailing()};
  }
};

}  // namespace lutforge
