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
#include <span>
#include <string>
#include <vector>

#include "lutforge/model.hpp"
#include "lutforge/tensor.hpp"

namespace lutforge {

/// Features x (N, features...) and targets y: (N, 1) class indices for
/// classification, (N, t) values for regression.
struct Split {
  Tensor x;
  Tensor y;
  std::size_t size() const { return x.batch(); }
};

struct Dataset {
  Task task = Task::kClassification;
  std::size_t n_classes = 0;
  Split train, val, test;
  // Row indices of each split in the source file.
  std::vector<std::size_t> train_rows, val_rows, test_rows;
  // Standardization applied to every feature (identity when disabled).
  std::vector<double> mean, stddev;
};

enum class DataFormat { kCsv, kTensor };

struct DatasetSpec {
  std::string path;
  DataFormat format = DataFormat::kCsv;
  // CSV: column names; empty means every column except the label.
  std::vector<std::string> feature_columns;
  // CSV: column name. Tensor: column index as text; empty means last column.
  std::string label_column;
  Task task = Task::kClassification;
  // Expected class count for classification; 0 infers it from the labels.
  std::size_t n_classes = 0;
  std::uint64_t split_seed = 0;
  double val_fraction = 0.1;
  double test_fraction = 0.0;
  bool standardize = true;
  // Per-sample feature shape; empty means (n_features).
  Shape sample_shape;
  // Written when non-empty: normalized table as an LFTD file.
  std::string cache_path;
};

/// Reads, standardizes (train statistics) and splits a dataset. Throws
/// DataError naming the offending line for malformed input.
Dataset ingest(const DatasetSpec& spec);

/// Split with the given fractions and seed; the train split receives the
/// remainder. Deterministic for a given (n, seed).
struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};
SplitIndices make_split(std::size_t n, double val_fraction,
                        double test_fraction, std::uint64_t seed);

/// Throws DataError when two splits share a row.
void check_disjoint(const SplitIndices& s);

/// Raw tensor file: "LFTD", u32 ndim, u64 dims[ndim], f32 payload, then a
/// u64 FNV-1a checksum of everything before it. All little-endian.
void save_lftd(const std::string& path, const Tensor& t);
Tensor load_lftd(const std::string& path);

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Fraction of rows whose argmax (ties to the lowest index) equals the label.
double metric_accuracy(const Tensor& outputs, std::span<const double> labels);

/// (mean_k - mean_p) / ((sem_k + sem_p) / 2) with sem the standard error of
/// the mean (sample standard deviation over sqrt(n)). Empty when the
/// denominator is zero.
std::optional<double> metric_separation(std::span<const double> counts_k,
                                        std::span<const double> counts_p);

double metric_mse(const Tensor& outputs, const Tensor& targets);

}  // namespace lutforge
