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

#include "lutforge/resource.hpp"

#include <cmath>
#include <numbers>

#include "lutforge/error.hpp"

namespace lutforge {

void validate(const LutPrimitiveSpec& spec) {
  if (spec.y < 1 || spec.y > spec.x) {
    throw UsageError("LUT primitive spec requires 1 <= Y <= X, got X=" +
                     std::to_string(spec.x) + " Y=" + std::to_string(spec.y));
  }
}

double ebops_llut(double m, double n, const LutPrimitiveSpec& spec) {
  if (m <= 0.0 || n <= 0.0) return 0.0;
  if (m >= spec.y) return std::exp2(m - spec.x) * n;
  return (m / spec.y) * std::exp2(spec.y - spec.x) * n;
}

EbopsPartials ebops_llut_grad(double m, double n, const LutPrimitiveSpec& spec) {
  if (m <= 0.0 || n <= 0.0) return {};
  if (m >= spec.y) {
    const double p = std::exp2(m - spec.x);
    return {std::numbers::ln2 * p * n, p};
  }
  const double c = std::exp2(spec.y - spec.x) / spec.y;
  return {c * n, c * m};
}

namespace {

double width_of(const QuantizerState& q, std::size_t e, WidthMode mode) {
  return mode == WidthMode::kHard ? static_cast<double>(q.width(e))
                                  : q.soft_width(e);
}

double lut_dense_ebops(const LutDenseLayer& l, WidthMode mode,
                       const LutPrimitiveSpec& spec) {
  double total = 0.0;
  for (std::size_t e = 0; e < l.n_lluts(); ++e) {
    total += ebops_llut(width_of(l.q_in, e, mode), width_of(l.q_out, e, mode), spec);
  }
  return total * static_cast<double>(l.positions());
}

double qdense_ebops(const QDenseLayer& l, WidthMode mode) {
  double total = 0.0;
  for (std::size_t j = 0; j < l.c_in(); ++j) {
    const double bx = width_of(l.q_act, j, mode);
    for (std::size_t o = 0; o < l.c_out(); ++o) {
      total += width_of(l.q_w, j * l.c_out() + o, mode) * bx;
    }
  }
  const double positions =
      static_cast<double>(shape_size(l.input_shape()) / l.c_in());
  return total * positions;
}

void lut_dense_backward(LutDenseLayer& l, double scale,
                        const LutPrimitiveSpec& spec) {
  const double pos = static_cast<double>(l.positions());
  for (std::size_t e = 0; e < l.n_lluts(); ++e) {
    const auto g = ebops_llut_grad(l.q_in.soft_width(e), l.q_out.soft_width(e), spec);
    if (l.q_in.trainable) l.q_in.f_grad[e] += scale * pos * g.d_m * l.q_in.soft_width_grad(e);
    if (l.q_out.trainable) l.q_out.f_grad[e] += scale * pos * g.d_n * l.q_out.soft_width_grad(e);
  }
}

void qdense_backward(QDenseLayer& l, double scale) {
  const double pos = static_cast<double>(shape_size(l.input_shape()) / l.c_in());
  for (std::size_t j = 0; j < l.c_in(); ++j) {
    const double bx = l.q_act.soft_width(j);
    double sum_w = 0.0;
    for (std::size_t o = 0; o < l.c_out(); ++o) {
      const std::size_t e = j * l.c_out() + o;
      sum_w += l.q_w.soft_width(e);
      if (l.q_w.trainable) l.q_w.f_grad[e] += scale * pos * bx * l.q_w.soft_width_grad(e);
    }
    if (l.q_act.trainable) l.q_act.f_grad[j] += scale * pos * sum_w * l.q_act.soft_width_grad(j);
  }
}

void ensure_grad(QuantizerState& q) {
  if (q.f_grad.size() != q.size()) q.f_grad.assign(q.size(), 0.0);
}

}  // namespace

double ebops_layer(const Layer& layer, WidthMode mode,
                   const LutPrimitiveSpec& spec) {
  switch (layer.kind()) {
    case LayerKind::kLutDense:
      return lut_dense_ebops(static_cast<const LutDenseLayer&>(layer), mode, spec);
    case LayerKind::kLutConv:
      return lut_dense_ebops(static_cast<const LutConvLayer&>(layer).inner, mode, spec);
    case LayerKind::kQDense:
      return qdense_ebops(static_cast<const QDenseLayer&>(layer), mode);
    case LayerKind::kFlatten:
      return 0.0;
  }
  return 0.0;
}

double ebops_model(const Model& model, WidthMode mode,
                   const LutPrimitiveSpec& spec) {
  double total = 0.0;
  for (const auto& l : model.layers()) total += ebops_layer(*l, mode, spec);
  return total;
}

double ebops_llut_term(const LutDenseLayer& layer, std::size_t e,
                       const LutPrimitiveSpec& spec) {
  return ebops_llut(layer.q_in.width(e), layer.q_out.width(e), spec);
}

std::vector<LayerResource> resource_breakdown(const Model& model,
                                              const LutPrimitiveSpec& spec) {
  std::vector<LayerResource> out;
  for (std::size_t k = 0; k < model.layers().size(); ++k) {
    const Layer& layer = *model.layers()[k];
    LayerResource r;
    r.index = k;
    r.kind = layer.kind();
    r.ebops = ebops_layer(layer, WidthMode::kHard, spec);
    const LutDenseLayer* grid = nullptr;
    if (layer.kind() == LayerKind::kLutDense) {
      grid = &static_cast<const LutDenseLayer&>(layer);
    } else if (layer.kind() == LayerKind::kLutConv) {
      grid = &static_cast<const LutConvLayer&>(layer).inner;
    }
    if (grid != nullptr) {
      std::size_t live = 0;
      double sum_m = 0.0;
      double sum_n = 0.0;
      for (std::size_t e = 0; e < grid->n_lluts(); ++e) {
        if (grid->pruned(e)) continue;
        ++live;
        sum_m += grid->q_in.width(e);
        sum_n += grid->q_out.width(e);
      }
      r.lluts = grid->n_lluts() * grid->positions();
      r.pruned = (grid->n_lluts() - live) * grid->positions();
      if (live != 0) {
        r.mean_m = sum_m / static_cast<double>(live);
        r.mean_n = sum_n / static_cast<double>(live);
      }
    }
    out.push_back(r);
  }
  return out;
}

double ebops_backward(Model& model, double scale, const LutPrimitiveSpec& spec) {
  for (auto& lp : model.layers()) {
    Layer& layer = *lp;
    if (layer.kind() == LayerKind::kLutDense || layer.kind() == LayerKind::kLutConv) {
      auto& l = layer.kind() == LayerKind::kLutDense
                    ? static_cast<LutDenseLayer&>(layer)
                    : static_cast<LutConvLayer&>(layer).inner;
      if (!l.q_in.enabled || !l.q_out.enabled) continue;
      ensure_grad(l.q_in);
      ensure_grad(l.q_out);
      lut_dense_backward(l, scale, spec);
    } else if (layer.kind() == LayerKind::kQDense) {
      auto& l = static_cast<QDenseLayer&>(layer);
      if (!l.q_w.enabled || !l.q_act.enabled) continue;
      ensure_grad(l.q_w);
      ensure_grad(l.q_act);
      qdense_backward(l, scale);
    }
  }
  return ebops_model(model, WidthMode::kSoft, spec);
}

double estimate_luts(double ebops) {
  return ebops <= 0.0 ? 0.0 : std::pow(ebops, 0.985);
}

}  // namespace lutforge
