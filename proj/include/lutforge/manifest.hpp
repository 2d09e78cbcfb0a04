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

#include <string>

#include "lutforge/model.hpp"

namespace lutforge {

inline constexpr int kManifestVersion = 1;

/// JSON document with sorted keys; real-valued tensors are base64 blobs of
/// little-endian f64. Serialization is canonical, so save(load(save(m)))
/// reproduces the same bytes.
std::string manifest_to_string(const Model& model);
Model manifest_from_string(const std::string& text);

void save_manifest(const std::string& path, const Model& model);
Model load_manifest(const std::string& path);

}  // namespace lutforge
