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


#include "lutforge/config.hpp"

#include <cstdio>
#include <random>
#include <set>

#include <json.hpp>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"

namespace lutforge {
namespace {

using nlohmann::json;

void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) {
    throw UsageError(std::string(where) + " must be an object");
  }
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) {
      throw UsageError(std::string("unknown key '") + k + "' in " + where);
    }
  }
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

std::vector<std::size_t> sizes(const json& j) {
  if (j.is_number_unsigned() || j.is_number_integer()) {
    return {j.get<std::size_t>()};
  }
  return j.get<std::vector<std::size_t>>();
}

DatasetSpec parse_dataset(const json& j) {
  check_keys(j, "dataset",
             {"path", "format", "features", "label", "task", "n_classes",
              "split_seed", "val_fraction", "test_fraction", "standardize",
              "sample_shape", "cache"});
  DatasetSpec d;
  get(j, "path", d.path);
  std::string fmt = "csv";
  get(j, "format", fmt);
  if (fmt == "csv") {
    d.format = DataFormat::kCsv;
  } else if (fmt == "tensor") {
    d.format = DataFormat::kTensor;
  } else {
    throw UsageError("dataset.format must be 'csv' or 'tensor'");
  }
  get(j, "features", d.feature_columns);
  get(j, "label", d.label_column);
  if (j.contains("task")) d.task = parse_task(j.at("task").get<std::string>());
  get(j, "n_classes", d.n_classes);
  get(j, "split_seed", d.split_seed);
  get(j, "val_fraction", d.val_fraction);
  get(j, "test_fraction", d.test_fraction);
  get(j, "standardize", d.standardize);
  get(j, "sample_shape", d.sample_shape);
  get(j, "cache", d.cache_path);
  return d;
}

LayerSpec parse_layer(const json& j) {
  check_keys(j, "layer",
             {"kind", "units", "hidden", "activation", "batchnorm", "init_f",
              "kernel", "stride", "padding", "act_mode"});
  LayerSpec l;
  const std::string kind = j.value("kind", std::string());
  if (kind == "lut_dense") {
    l.kind = LayerKind::kLutDense;
  } else if (kind == "lut_conv") {
    l.kind = LayerKind::kLutConv;
  } else if (kind == "qdense") {
    l.kind = LayerKind::kQDense;
  } else if (kind == "flatten") {
    l.kind = LayerKind::kFlatten;
  } else {
    throw UsageError("unknown layer kind '" + kind + "'");
  }
  get(j, "units", l.units);
  if (l.kind != LayerKind::kFlatten && l.units == 0) {
    throw UsageError("layer '" + kind + "' needs units > 0");
  }
  get(j, "hidden", l.lut.hidden);
  if (j.contains("activation")) {
    l.lut.activation = parse_activation(j.at("activation").get<std::string>());
  }
  get(j, "batchnorm", l.lut.use_batchnorm);
  get(j, "init_f", l.lut.init_f);
  l.qdense.init_f = l.lut.init_f;
  if (l.kind == LayerKind::kLutConv) {
    if (!j.contains("kernel")) throw UsageError("lut_conv needs a kernel");
    l.conv.kernel = sizes(j.at("kernel"));
    l.conv.stride = j.contains("stride")
                        ? sizes(j.at("stride"))
                        : std::vector<std::size_t>(l.conv.kernel.size(), 1);
    if (j.contains("padding")) {
      l.conv.padding = parse_padding(j.at("padding").get<std::string>());
    }
  }
  if (j.contains("act_mode")) {
    l.qdense.act_mode = parse_overflow_mode(j.at("act_mode").get<std::string>());
  }
  return l;
}

TrainConfig parse_train(const json& j) {
  check_keys(j, "train",
             {"beta_start", "beta_end", "epochs", "steps_per_epoch",
              "batch_size", "lr", "restart_period", "restart_mult",
              "f_lr_mult", "seed", "max_nan_steps", "quantized", "lut_x",
              "lut_y"});
  TrainConfig t;
  get(j, "beta_start", t.beta_start);
  get(j, "beta_end", t.beta_end);
  get(j, "epochs", t.epochs);
  get(j, "steps_per_epoch", t.steps_per_epoch);
  get(j, "batch_size", t.batch_size);
  get(j, "lr", t.lr_base);
  get(j, "restart_period", t.restart_period);
  get(j, "restart_mult", t.restart_mult);
  get(j, "f_lr_mult", t.f_lr_mult);
  get(j, "seed", t.seed);
  get(j, "max_nan_steps", t.max_nan_steps);
  get(j, "quantized", t.quantized);
  get(j, "lut_x", t.lut.x);
  get(j, "lut_y", t.lut.y);
  return t;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig rc;
  try {
    check_keys(j, "config", {"dataset", "model", "train"});
    if (j.contains("dataset")) rc.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, "model", {"input_frac_bits", "layers"});
      get(m, "input_frac_bits", rc.model.input_frac_bits);
      if (m.contains("layers")) {
        for (const auto& l : m.at("layers")) {
          rc.model.layers.push_back(parse_layer(l));
        }
      }
    }
    if (j.contains("train")) rc.train = parse_train(j.at("train"));
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
  rc.train.val_fraction = rc.dataset.val_fraction;
  const std::string canon = j.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(std::span(
                    reinterpret_cast<const std::uint8_t*>(canon.data()),
                    canon.size()))));
  rc.hash = buf;
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

Model build_model(const ModelSpec& spec, const Shape& input_shape, Task task,
                  std::uint64_t seed) {
  if (spec.layers.empty()) throw UsageError("model has no layers");
  Model model(input_shape, spec.input_frac_bits);
  model.task = task;
  model.seed = seed;
  std::mt19937_64 rng(seed);
  for (const auto& l : spec.layers) {
    switch (l.kind) {
      case LayerKind::kLutDense:
        model.add_lut_dense(l.units, l.lut, rng);
        break;
      case LayerKind::kLutConv:
        model.add_lut_conv(l.units, l.conv, l.lut, rng);
        break;
      case LayerKind::kQDense:
        model.add_qdense(l.units, l.qdense, rng);
        break;
      case LayerKind::kFlatten:
        model.add_flatten();
        break;
    }
  }
  return model;
}

}  // namespace lutforge
