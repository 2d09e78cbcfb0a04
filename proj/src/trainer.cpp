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

#include "lutforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"
#include "lutforge/manifest.hpp"

namespace lutforge {

void validate(const TrainConfig& cfg) {
  const bool off = cfg.beta_start == 0.0 && cfg.beta_end == 0.0;
  if (!off && !(cfg.beta_start > 0.0 && cfg.beta_end >= cfg.beta_start)) {
    throw UsageError("beta schedule requires beta_end >= beta_start > 0 (or both 0)");
  }
  if (cfg.epochs == 0 || cfg.batch_size == 0) {
    throw UsageError("epochs and batch_size must be positive");
  }
  if (!(cfg.lr_base > 0.0)) throw UsageError("lr_base must be positive");
  if (cfg.restart_period < 0.0 || !(cfg.restart_mult >= 1.0)) {
    throw UsageError("restart_period must be >= 0 and restart_mult >= 1");
  }
  if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) {
    throw UsageError("val_fraction must lie in (0, 1)");
  }
  validate(cfg.lut);
}

double beta_at(double t, double total, const TrainConfig& cfg) {
  if (cfg.beta_start == 0.0) return 0.0;
  const double frac = total > 0.0 ? std::clamp(t / total, 0.0, 1.0) : 0.0;
  return cfg.beta_start * std::pow(cfg.beta_end / cfg.beta_start, frac);
}

double lr_at(double t, double lr_base, double period, double mult) {
  double tau = std::max(t, 0.0);
  double p = period;
  if (p <= 0.0) return lr_base;
  while (tau > p) {
    tau -= p;
    p *= mult;
  }
  return lr_base * (1.0 + std::cos(std::numbers::pi * tau / p)) / 2.0;
}

bool Adam::step(std::span<const ParamRef> params, double lr) {
  for (const auto& p : params) {
    for (double g : p.grad) {
      if (!std::isfinite(g)) {
        ++skipped_;
        return false;
      }
    }
  }
  if (m_.size() != params.size()) {
    m_.resize(params.size());
    v_.resize(params.size());
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    if (m_[k].size() != p.value.size()) {
      m_[k].assign(p.value.size(), 0.0);
      v_[k].assign(p.value.size(), 0.0);
    }
    for (std::size_t e = 0; e < p.value.size(); ++e) {
      const double g = p.grad[e];
      m_[k][e] = cfg_.beta1 * m_[k][e] + (1.0 - cfg_.beta1) * g;
      v_[k][e] = cfg_.beta2 * v_[k][e] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m_[k][e] / c1;
      const double vhat = v_[k][e] / c2;
      p.value[e] -= lr * p.lr_scale * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
  return true;
}

bool dominates(const ParetoEntry& a, const ParetoEntry& b) {
  return a.ebops <= b.ebops && a.metric >= b.metric &&
         (a.ebops < b.ebops || a.metric > b.metric);
}

bool ParetoSet::insert(const ParetoEntry& e, std::vector<std::string>* evicted) {
  for (const auto& x : entries_) {
    if (dominates(x, e) || (x.ebops == e.ebops && x.metric == e.metric)) return false;
  }
  std::vector<ParetoEntry> kept;
  for (auto& x : entries_) {
    if (dominates(e, x)) {
      if (evicted != nullptr) evicted->push_back(x.checkpoint_id);
    } else {
      kept.push_back(x);
    }
  }
  kept.push_back(e);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const ParetoEntry& a, const ParetoEntry& b) { return a.ebops < b.ebops; });
  entries_ = std::move(kept);
  return true;
}

double task_loss(const Tensor& outputs, const Tensor& targets, Task task, Tensor* grad) {
  const std::size_t rows = outputs.batch();
  if (rows == 0 || targets.batch() != rows) {
    throw ShapeError("loss: outputs and targets disagree on batch size");
  }
  if (grad != nullptr) *grad = Tensor(outputs.shape);
  const double inv_n = 1.0 / static_cast<double>(rows);
  if (task == Task::kRegression) {
    if (targets.size() != outputs.size()) throw ShapeError("loss: regression target size mismatch");
    const double inv = 1.0 / static_cast<double>(outputs.size());
    double s = 0.0;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const double d = outputs.data[k] - targets.data[k];
      s += d * d;
      if (grad != nullptr) grad->data[k] = 2.0 * d * inv;
    }
    return s * inv;
  }
  const std::size_t c = outputs.size() / rows;
  double loss = 0.0;
  std::vector<double> p(c);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* o = &outputs.data[r * c];
    const auto label = static_cast<std::size_t>(targets.data[r]);
    if (label >= c) {
      throw ShapeError("loss: label " + std::to_string(label) + " exceeds " +
                       std::to_string(c) + " model outputs");
    }
    const double mx = *std::max_element(o, o + c);
    double z = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      p[k] = std::exp(o[k] - mx);
      z += p[k];
    }
    loss += std::log(z) + mx - o[label];
    if (grad != nullptr) {
      for (std::size_t k = 0; k < c; ++k) {
        grad->data[r * c + k] = (p[k] / z - (k == label ? 1.0 : 0.0)) * inv_n;
      }
    }
  }
  return loss * inv_n;
}

double evaluate(const Model& model, const Split& split, Task task) {
  const Tensor out = model.forward_eval(split.x);
  if (task == Task::kClassification) return metric_accuracy(out, split.y.data);
  return -metric_mse(out, split.y);
}

namespace {

Split gather(const Split& src, std::span<const std::size_t> idx) {
  const std::size_t xs = src.x.size() / src.x.batch();
  const std::size_t ys = src.y.size() / src.y.batch();
  Shape xshape = src.x.shape;
  Shape yshape = src.y.shape;
  xshape[0] = idx.size();
  yshape[0] = idx.size();
  Split out{Tensor(xshape), Tensor(yshape)};
  for (std::size_t k = 0; k < idx.size(); ++k) {
    std::copy_n(&src.x.data[idx[k] * xs], xs, &out.x.data[k * xs]);
    std::copy_n(&src.y.data[idx[k] * ys], ys, &out.y.data[k * ys]);
  }
  return out;
}

void reshuffle(std::vector<std::size_t>& perm, std::mt19937_64& rng) {
  for (std::size_t k = perm.size(); k > 1; --k) {
    std::swap(perm[k - 1], perm[static_cast<std::size_t>(rng() % k)]);
  }
}

void clamp_fractions(Model& model) {
  auto clip = [](QuantizerState& q) {
    for (double& f : q.f_raw) f = std::clamp(f, static_cast<double>(q.min_f), static_cast<double>(q.max_f));
  };
  for (auto& l : model.layers()) {
    switch (l->kind()) {
      case LayerKind::kLutDense: {
        auto& d = static_cast<LutDenseLayer&>(*l);
        clip(d.q_in);
        clip(d.q_out);
        break;
      }
      case LayerKind::kLutConv: {
        auto& d = static_cast<LutConvLayer&>(*l).inner;
        clip(d.q_in);
        clip(d.q_out);
        break;
      }
      case LayerKind::kQDense: {
        auto& d = static_cast<QDenseLayer&>(*l);
        clip(d.q_w);
        clip(d.q_b);
        clip(d.q_act);
        break;
      }
      case LayerKind::kFlatten:
        break;
    }
  }
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string run_log_csv(const std::vector<EpochLog>& log) {
  std::string s = "epoch,beta,lr,train_loss,val_metric,ebops\n";
  for (const auto& e : log) {
    s += std::to_string(e.epoch) + "," + fmt_double(e.beta) + "," + fmt_double(e.lr) + "," +
         fmt_double(e.train_loss) + "," + fmt_double(e.val_metric) + "," +
         fmt_double(e.ebops) + "\n";
  }
  return s;
}

std::string pareto_csv(const ParetoSet& set) {
  std::string s = "checkpoint_id,epoch,ebops,val_metric,est_luts\n";
  for (const auto& e : set.entries()) {
    s += e.checkpoint_id + "," + std::to_string(e.epoch) + "," + fmt_double(e.ebops) + "," +
         fmt_double(e.metric) + "," + fmt_double(estimate_luts(e.ebops)) + "\n";
  }
  return s;
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& progress) {
  validate(cfg);
  const std::size_t n = data.train.size();
  if (n == 0) throw TrainingError("training split is empty");
  const Split& val = data.val.size() != 0 ? data.val : data.train;

  model.set_quantizers_enabled(cfg.quantized);
  model.task = data.task;
  model.seed = cfg.seed;

  const std::size_t batch = std::min(cfg.batch_size, n);
  const std::size_t steps = cfg.steps_per_epoch != 0 ? cfg.steps_per_epoch : (n + batch - 1) / batch;
  const double total = static_cast<double>(cfg.epochs * steps);
  const double period =
      cfg.restart_period > 0.0 ? cfg.restart_period * static_cast<double>(steps) : total;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  reshuffle(perm, rng);
  std::size_t cursor = 0;

  Adam adam;
  TrainResult result;
  std::size_t nan_streak = 0;
  std::size_t step = 0;
  const bool write = !cfg.out_dir.empty();
  const std::string ckpt_dir = cfg.out_dir + "/checkpoints";

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    double beta = 0.0;
    double lr = 0.0;
    for (std::size_t s = 0; s < steps; ++s, ++step) {
      std::vector<std::size_t> idx;
      idx.reserve(batch);
      while (idx.size() < batch) {
        if (cursor == n) {
          reshuffle(perm, rng);
          cursor = 0;
        }
        idx.push_back(perm[cursor++]);
      }
      const Split b = gather(data.train, idx);
      model.zero_grad();
      const Tensor out = model.forward_train(b.x);
      Tensor grad;
      const double data_loss = task_loss(out, b.y, data.task, &grad);
      beta = cfg.quantized ? beta_at(static_cast<double>(step), total, cfg) : 0.0;
      lr = lr_at(static_cast<double>(step), cfg.lr_base, period, cfg.restart_mult);
      if (!std::isfinite(data_loss)) {
        if (++nan_streak > cfg.max_nan_steps) {
          throw TrainingError("loss was non-finite for " + std::to_string(nan_streak) +
                              " consecutive steps (epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step) +
                              "); lower lr_base or check the input data");
        }
        ++result.skipped_steps;
        continue;
      }
      nan_streak = 0;
      model.backward(grad);
      double reg = 0.0;
      if (beta > 0.0) reg = ebops_backward(model, beta, cfg.lut);
      loss_sum += data_loss + beta * reg;
      ++loss_count;
      auto params = model.params();
      for (auto& p : params) {
        if (p.name.ends_with(".f")) p.lr_scale = cfg.f_lr_mult;
      }
      if (!adam.step(params, lr)) {
        ++result.skipped_steps;
        continue;
      }
      clamp_fractions(model);
    }

    EpochLog log;
    log.epoch = epoch;
    log.beta = beta;
    log.lr = lr;
    log.train_loss = loss_count != 0 ? loss_sum / static_cast<double>(loss_count)
                                     : std::numeric_limits<double>::quiet_NaN();
    log.val_metric = evaluate(model, val, data.task);
    log.ebops = ebops_model(model, WidthMode::kHard, cfg.lut);
    result.log.push_back(log);
    result.best_val_metric =
        epoch == 0 ? log.val_metric : std::max(result.best_val_metric, log.val_metric);

    char id[32];
    std::snprintf(id, sizeof id, "epoch_%04zu", epoch);
    std::vector<std::string> evicted;
    if (result.pareto.insert({log.ebops, log.val_metric, id, epoch}, &evicted)) {
      result.checkpoints.insert_or_assign(id, model);
      if (write) save_manifest(ckpt_dir + "/" + id + ".json", model);
    }
    for (const auto& e : evicted) {
      result.checkpoints.erase(e);
      if (write) std::filesystem::remove(ckpt_dir + "/" + e + ".json");
    }
    if (write) {
      write_file_atomic(cfg.out_dir + "/run_log.csv", run_log_csv(result.log));
      write_file_atomic(cfg.out_dir + "/pareto.csv", pareto_csv(result.pareto));
    }
    if (progress) progress(log);
  }
  return result;
}

}  // namespace lutforge
