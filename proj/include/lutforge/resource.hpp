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
#include <vector>

#include "lutforge/model.hpp"

namespace lutforge {

/// FPGA LUT primitive: X inputs, splittable down to LUT-Y units.
struct LutPrimitiveSpec {
  int x = 6;
  int y = 5;
};

void validate(const LutPrimitiveSpec& spec);

/// LUT cost of one L-LUT with an m-bit input and n-bit output. Real-valued
/// so that soft (continuous) widths can be fed during training.
double ebops_llut(double m, double n, const LutPrimitiveSpec& spec = {});

struct EbopsPartials {
  double d_m = 0.0;
  double d_n = 0.0;
};
EbopsPartials ebops_llut_grad(double m, double n,
                              const LutPrimitiveSpec& spec = {});

/// Hard widths are the rounded integer widths used by hardware; soft widths
/// follow f_raw continuously.
enum class WidthMode { kHard, kSoft };

double ebops_layer(const Layer& layer, WidthMode mode,
                   const LutPrimitiveSpec& spec = {});
double ebops_model(const Model& model, WidthMode mode = WidthMode::kHard,
                   const LutPrimitiveSpec& spec = {});

/// Hard-width cost of L-LUT e of a LUT-Dense grid, for a single position.
double ebops_llut_term(const LutDenseLayer& layer, std::size_t e,
                       const LutPrimitiveSpec& spec = {});

struct LayerResource {
  std::size_t index = 0;
  LayerKind kind = LayerKind::kFlatten;
  double ebops = 0.0;
  // L-LUT grid size times positions; zero for non-LUT layers.
  std::size_t lluts = 0;
  std::size_t pruned = 0;
  // Mean hard input and output width of the unpruned L-LUTs.
  double mean_m = 0.0;
  double mean_n = 0.0;
};

std::vector<LayerResource> resource_breakdown(const Model& model,
                                              const LutPrimitiveSpec& spec = {});

/// Adds scale * d(soft EBOPs)/d f_raw into every trainable quantizer's
/// f_grad and returns the soft EBOPs value.
double ebops_backward(Model& model, double scale,
                      const LutPrimitiveSpec& spec = {});

/// Empirical LUT-count fit: ebops^0.985, or 0 for ebops <= 0.
double estimate_luts(double ebops);

}  // namespace lutforge
