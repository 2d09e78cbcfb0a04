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
#include <optional>
#include <vector>

#include "lutforge/fxp.hpp"
#include "lutforge/layers.hpp"

namespace lutforge {

/// Explicit m-bit-in / n-bit-out table: entries[k] is the out_fmt bit
/// pattern produced for the in_fmt bit pattern k.
struct TruthTable {
  FxpFormat in_fmt;
  FxpFormat out_fmt;
  std::vector<std::uint64_t> entries;

  int m() const { return in_fmt.width(); }
  int n() const { return out_fmt.width(); }
  bool operator==(const TruthTable&) const = default;
};

struct ExtractOptions {
  int max_table_bits = 16;
};

/// Tables of a LUT-Dense grid; empty slots are pruned L-LUTs (zero width or
/// all-zero table).
struct TableGrid {
  std::size_t c_in = 0;
  std::size_t c_out = 0;
  std::vector<std::optional<TruthTable>> tables;  // j * c_out + i

  const std::optional<TruthTable>& at(std::size_t j, std::size_t i) const {
    return tables[j * c_out + i];
  }
};

/// Enumerates every input of every L-LUT through the eval-mode MLP (with
/// batch-norm folded) and the output quantizer. L-LUTs are processed in
/// groups sharing the same (m, hidden) so each group is one batched pass.
/// Throws ExtractionError for float-mode or uncalibrated layers and for
/// inputs wider than max_table_bits.
TableGrid extract_layer(const LutDenseLayer& layer, const ExtractOptions& opts = {});

}  // namespace lutforge
