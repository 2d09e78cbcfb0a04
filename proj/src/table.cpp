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

#include "lutforge/table.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lutforge/error.hpp"

namespace lutforge {

TableGrid extract_layer(const LutDenseLayer& layer, const ExtractOptions& opts) {
  if (!layer.q_in.enabled || !layer.q_out.enabled) {
    throw ExtractionError("cannot extract tables from a float-mode layer (quantizers disabled)");
  }
  if (!layer.q_in.calibrated || !layer.q_out.calibrated) {
    throw ExtractionError("cannot extract tables from an uncalibrated layer");
  }
  if (layer.bn && !layer.bn->populated) {
    throw ExtractionError("batch-norm running statistics were never populated");
  }
  const std::size_t n = layer.n_lluts();
  const std::size_t h = layer.hidden();
  TableGrid grid{layer.c_in(), layer.c_out(), std::vector<std::optional<TruthTable>>(n)};

  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t e = 0; e < n; ++e) {
    if (layer.pruned(e)) continue;
    const FxpFormat in = layer.q_in.format(e);
    const FxpFormat out = layer.q_out.format(e);
    if (in.width() > opts.max_table_bits) {
      throw ExtractionError(
          "L-LUT (" + std::to_string(e / layer.c_out()) + ", " +
          std::to_string(e % layer.c_out()) + ") has a " + std::to_string(in.width()) +
          "-bit input; tables are limited to max_table_bits=" +
          std::to_string(opts.max_table_bits) +
          " (2^" + std::to_string(opts.max_table_bits) +
          " entries). Reduce the input width or raise the limit");
    }
    if (out.width() > (out.is_signed ? 64 : 63)) {
      throw ExtractionError("L-LUT output width " + std::to_string(out.width()) +
                            " exceeds the 64-bit wire limit");
    }
    groups[in.width()].push_back(e);
  }

  const auto folded = layer.folded_output();
  for (const auto& [m, members] : groups) {
    const std::size_t len = std::size_t{1} << m;
    // Decoded inputs and accumulators for the whole group, member-major.
    std::vector<double> x(members.size() * len);
    std::vector<double> y(members.size() * len, 0.0);
    for (std::size_t g = 0; g < members.size(); ++g) {
      const FxpFormat in = layer.q_in.format(members[g]);
      for (std::size_t k = 0; k < len; ++k) x[g * len + k] = from_bits(k, in);
    }
    // Same operation order as llut_mlp: accumulate hidden units in order,
    // then add the output bias.
    for (std::size_t kh = 0; kh < h; ++kh) {
      for (std::size_t g = 0; g < members.size(); ++g) {
        const std::size_t o = members[g] * h + kh;
        const double w0 = layer.w0[o], b0 = layer.b0[o], w1 = folded.w1[o];
        double* yy = &y[g * len];
        const double* xx = &x[g * len];
        for (std::size_t k = 0; k < len; ++k) {
          yy[k] += w1 * activate(layer.activation, w0 * xx[k] + b0);
        }
      }
    }
    for (std::size_t g = 0; g < members.size(); ++g) {
      const std::size_t e = members[g];
      const FxpFormat out = layer.q_out.format(e);
      TruthTable t{layer.q_in.format(e), out, std::vector<std::uint64_t>(len)};
      bool any = false;
      for (std::size_t k = 0; k < len; ++k) {
        const double v = y[g * len + k] + folded.b1[e];
        const double q = quantize_value(v, out, layer.q_out.mode, layer.q_out.rounding);
        t.entries[k] = to_bits(q, out);
        any = any || t.entries[k] != 0;
      }
      if (any) grid.tables[e] = std::move(t);
    }
  }
  return grid;
}

}  // namespace lutforge
