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
#include <string>
#include <vector>

#include "lutforge/data.hpp"
#include "lutforge/model.hpp"
#include "lutforge/trainer.hpp"

namespace lutforge {

struct LayerSpec {
  LayerKind kind = LayerKind::kLutDense;
  std::size_t units = 0;
  LutDenseOptions lut;
  ConvOptions conv;
  QDenseOptions qdense;
};

struct ModelSpec {
  int input_frac_bits = 6;
  std::vector<LayerSpec> layers;
};

/// Everything a run needs, parsed from one JSON document:
///
///   { "dataset": {...}, "model": {"input_frac_bits": 6, "layers": [...]},
///     "train": {...} }
///
/// Unknown keys are rejected so typos surface as usage errors.
struct RunConfig {
  DatasetSpec dataset;
  ModelSpec model;
  TrainConfig train;
  // Hex FNV-1a of the canonical config text.
  std::string hash;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Builds and initializes the model described by spec; weights drawn from seed.
Model build_model(const ModelSpec& spec, const Shape& input_shape, Task task,
                  std::uint64_t seed);

}  // namespace lutforge
