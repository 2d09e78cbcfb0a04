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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lutforge/data.hpp"
#include "lutforge/model.hpp"
#include "lutforge/resource.hpp"

namespace lutforge {

struct TrainConfig {
  // Regularization strength sweeps geometrically from beta_start to beta_end
  // over the run. beta_start = beta_end = 0 disables the resource term.
  double beta_start = 5e-7;
  double beta_end = 1e-3;
  std::size_t epochs = 20;
  // 0 means one pass over the training split per epoch.
  std::size_t steps_per_epoch = 0;
  std::size_t batch_size = 256;
  double lr_base = 3e-3;
  // Cosine restart period in epochs; 0 means a single period over the run.
  double restart_period = 0.0;
  double restart_mult = 2.0;
  // Learning-rate multiplier for the fractional-bit parameters.
  double f_lr_mult = 20.0;
  std::uint64_t seed = 0;
  double val_fraction = 0.1;
  // Abort after this many consecutive non-finite losses.
  std::size_t max_nan_steps = 10;
  // False trains in float mode: every quantizer passes values through.
  bool quantized = true;
  LutPrimitiveSpec lut;
  // Checkpoints and run_log.csv are written here when non-empty.
  std::string out_dir;
};

void validate(const TrainConfig& cfg);

/// beta_start * (beta_end / beta_start)^(t / total).
double beta_at(double t, double total, const TrainConfig& cfg);

/// Cosine annealing with warm restarts. Period k lasts period * mult^k
/// steps; within it lr = lr_base * (1 + cos(pi * tau / P_k)) / 2.
double lr_at(double t, double lr_base, double period, double mult);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Applies one update to every parameter. A step whose gradients are not
  /// all finite is skipped entirely (no parameter or moment changes) and
  /// counted; returns false in that case.
  bool step(std::span<const ParamRef> params, double lr);

  std::size_t steps() const noexcept { return t_; }
  std::size_t skipped() const noexcept { return skipped_; }

 private:
  AdamConfig cfg_;
  std::size_t t_ = 0;
  std::size_t skipped_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct ParetoEntry {
  double ebops = 0.0;
  // Higher is better.
  double metric = 0.0;
  std::string checkpoint_id;
  std::size_t epoch = 0;
  bool operator==(const ParetoEntry&) const = default;
};

/// True when a is no worse than b in both coordinates and strictly better in
/// at least one.
bool dominates(const ParetoEntry& a, const ParetoEntry& b);

/// Non-dominated (EBOPs, metric) pairs, kept sorted by increasing EBOPs.
class ParetoSet {
 public:
  /// Inserts e unless an existing entry dominates or equals it; entries that
  /// e dominates are removed and their checkpoint ids appended to evicted.
  bool insert(const ParetoEntry& e, std::vector<std::string>* evicted = nullptr);
  const std::vector<ParetoEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool operator==(const ParetoSet&) const = default;

 private:
  std::vector<ParetoEntry> entries_;
};

struct EpochLog {
  std::size_t epoch = 0;
  double beta = 0.0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double ebops = 0.0;
};

struct TrainResult {
  ParetoSet pareto;
  std::vector<EpochLog> log;
  // Eval-ready copies of the Pareto members, keyed by checkpoint id.
  std::map<std::string, Model> checkpoints;
  std::size_t skipped_steps = 0;
  double best_val_metric = 0.0;
};

/// Task loss of model outputs against targets and its gradient (mean over
/// the batch): softmax cross-entropy for classification, mean squared error
/// for regression.
double task_loss(const Tensor& outputs, const Tensor& targets, Task task,
                 Tensor* grad);

/// Validation metric (higher is better): accuracy for classification,
/// negative MSE for regression.
double evaluate(const Model& model, const Split& split, Task task);

/// Trains in place. Progress callback (optional) is called once per epoch.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& progress = {});

std::string run_log_csv(const std::vector<EpochLog>& log);
std::string pareto_csv(const ParetoSet& set);

}  // namespace lutforge
