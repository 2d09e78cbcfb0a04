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

#include "lutforge/manifest.hpp"

#include <json.hpp>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"

namespace lutforge {

using nlohmann::json;

namespace {

json blob(const std::vector<double>& v) {
  ByteWriter w;
  for (double x : v) w.f64(x);
  return base64_encode(w.str());
}

std::vector<double> unblob(const json& j, std::size_t expect, const char* what) {
  const std::string bytes = base64_decode(j.get<std::string>());
  if (bytes.size() != expect * 8) {
    throw DataError(std::string("manifest: tensor '") + what + "' holds " +
                    std::to_string(bytes.size() / 8) + " values, expected " +
                    std::to_string(expect));
  }
  ByteReader r(bytes, what);
  std::vector<double> out(expect);
  for (auto& x : out) x = r.f64();
  return out;
}

json quantizer_json(const QuantizerState& q) {
  std::vector<int> f(q.size());
  for (std::size_t e = 0; e < q.size(); ++e) f[e] = q.frac(e);
  std::vector<int> sgn(q.is_signed.begin(), q.is_signed.end());
  return json{{"mode", std::string(to_string(q.mode))},
              {"rounding", std::string(to_string(q.rounding))},
              {"size", q.size()},
              {"f", f},
              {"f_raw", blob(q.f_raw)},
              {"i_cal", q.i_cal},
              {"signed", sgn},
              {"min_f", q.min_f},
              {"max_f", q.max_f},
              {"enabled", q.enabled},
              {"trainable", q.trainable},
              {"calibrated", q.calibrated}};
}

QuantizerState quantizer_from(const json& j, std::size_t expect, const char* what) {
  const auto n = j.at("size").get<std::size_t>();
  if (n != expect) {
    throw DataError(std::string("manifest: quantizer '") + what + "' has " +
                    std::to_string(n) + " elements, expected " + std::to_string(expect));
  }
  QuantizerState q(n, parse_overflow_mode(j.at("mode").get<std::string>()),
                   parse_round_mode(j.at("rounding").get<std::string>()));
  q.f_raw = unblob(j.at("f_raw"), n, what);
  q.i_cal = j.at("i_cal").get<std::vector<int>>();
  const auto sgn = j.at("signed").get<std::vector<int>>();
  if (q.i_cal.size() != n || sgn.size() != n) {
    throw DataError(std::string("manifest: quantizer '") + what + "' arrays have the wrong length");
  }
  q.is_signed.assign(sgn.begin(), sgn.end());
  q.min_f = j.at("min_f").get<int>();
  q.max_f = j.at("max_f").get<int>();
  q.enabled = j.at("enabled").get<bool>();
  q.trainable = j.at("trainable").get<bool>();
  q.calibrated = j.at("calibrated").get<bool>();
  q.zero_grad();
  return q;
}

json lut_dense_json(const LutDenseLayer& l) {
  json j{{"input_shape", l.input_shape()},
         {"c_out", l.c_out()},
         {"hidden", l.hidden()},
         {"activation", std::string(to_string(l.activation))},
         {"w0", blob(l.w0)},
         {"b0", blob(l.b0)},
         {"w1", blob(l.w1)},
         {"b1", blob(l.b1)},
         {"q_in", quantizer_json(l.q_in)},
         {"q_out", quantizer_json(l.q_out)},
         {"batchnorm", nullptr}};
  if (l.bn) {
    j["batchnorm"] = json{{"gamma", blob(l.bn->gamma)},
                          {"beta", blob(l.bn->beta)},
                          {"running_mean", blob(l.bn->running_mean)},
                          {"running_var", blob(l.bn->running_var)},
                          {"momentum", l.bn->momentum},
                          {"eps", l.bn->eps},
                          {"populated", l.bn->populated}};
  }
  return j;
}

LutDenseLayer lut_dense_from(const json& j) {
  LutDenseOptions opts;
  opts.hidden = j.at("hidden").get<std::size_t>();
  opts.activation = parse_activation(j.at("activation").get<std::string>());
  LutDenseLayer l(j.at("input_shape").get<Shape>(), j.at("c_out").get<std::size_t>(), opts);
  const std::size_t n = l.n_lluts();
  l.w0 = unblob(j.at("w0"), n * opts.hidden, "w0");
  l.b0 = unblob(j.at("b0"), n * opts.hidden, "b0");
  l.w1 = unblob(j.at("w1"), n * opts.hidden, "w1");
  l.b1 = unblob(j.at("b1"), n, "b1");
  l.q_in = quantizer_from(j.at("q_in"), n, "q_in");
  l.q_out = quantizer_from(j.at("q_out"), n, "q_out");
  const json& b = j.at("batchnorm");
  if (!b.is_null()) {
    BatchNormState bn;
    bn.gamma = unblob(b.at("gamma"), n, "gamma");
    bn.beta = unblob(b.at("beta"), n, "beta");
    bn.running_mean = unblob(b.at("running_mean"), n, "running_mean");
    bn.running_var = unblob(b.at("running_var"), n, "running_var");
    bn.momentum = b.at("momentum").get<double>();
    bn.eps = b.at("eps").get<double>();
    bn.populated = b.at("populated").get<bool>();
    if (!(bn.eps > 0.0)) throw DataError("manifest: batch-norm eps must be positive");
    l.bn = std::move(bn);
  }
  l.zero_grad();
  return l;
}

json layer_json(const Layer& layer) {
  json j;
  switch (layer.kind()) {
    case LayerKind::kLutDense:
      j = lut_dense_json(static_cast<const LutDenseLayer&>(layer));
      break;
    case LayerKind::kLutConv: {
      const auto& l = static_cast<const LutConvLayer&>(layer);
      j = json{{"input_shape", l.input_shape()},
               {"kernel", l.conv().kernel},
               {"stride", l.conv().stride},
               {"padding", std::string(to_string(l.conv().padding))},
               {"inner", lut_dense_json(l.inner)}};
      break;
    }
    case LayerKind::kQDense: {
      const auto& l = static_cast<const QDenseLayer&>(layer);
      j = json{{"input_shape", l.input_shape()},
               {"c_out", l.c_out()},
               {"weights", blob(l.weights)},
               {"bias", blob(l.bias)},
               {"q_w", quantizer_json(l.q_w)},
               {"q_b", quantizer_json(l.q_b)},
               {"q_act", quantizer_json(l.q_act)}};
      break;
    }
    case LayerKind::kFlatten:
      j = json{{"input_shape", layer.input_shape()}};
      break;
  }
  j["kind"] = std::string(to_string(layer.kind()));
  return j;
}

std::unique_ptr<Layer> layer_from(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "lut_dense") return std::make_unique<LutDenseLayer>(lut_dense_from(j));
  if (kind == "lut_conv") {
    ConvOptions conv;
    conv.kernel = j.at("kernel").get<std::vector<std::size_t>>();
    conv.stride = j.at("stride").get<std::vector<std::size_t>>();
    conv.padding = parse_padding(j.at("padding").get<std::string>());
    LutDenseLayer inner = lut_dense_from(j.at("inner"));
    LutDenseOptions opts;
    opts.hidden = inner.hidden();
    opts.activation = inner.activation;
    auto l = std::make_unique<LutConvLayer>(j.at("input_shape").get<Shape>(),
                                            inner.c_out(), conv, opts);
    if (l->inner.input_shape() != inner.input_shape()) {
      throw DataError("manifest: lut_conv inner shape does not match its im2col");
    }
    l->inner = std::move(inner);
    return l;
  }
  if (kind == "qdense") {
    QDenseOptions opts;
    auto l = std::make_unique<QDenseLayer>(j.at("input_shape").get<Shape>(),
                                           j.at("c_out").get<std::size_t>(), opts);
    const std::size_t ci = l->c_in(), co = l->c_out();
    l->weights = unblob(j.at("weights"), ci * co, "weights");
    l->bias = unblob(j.at("bias"), co, "bias");
    l->q_w = quantizer_from(j.at("q_w"), ci * co, "q_w");
    l->q_b = quantizer_from(j.at("q_b"), co, "q_b");
    l->q_act = quantizer_from(j.at("q_act"), ci, "q_act");
    l->zero_grad();
    return l;
  }
  if (kind == "flatten") return std::make_unique<FlattenLayer>(j.at("input_shape").get<Shape>());
  throw DataError("manifest: unknown layer kind '" + kind + "'");
}

}  // namespace

std::string manifest_to_string(const Model& model) {
  json layers = json::array();
  for (const auto& l : model.layers()) layers.push_back(layer_json(*l));
  json j{{"format", "lutforge-manifest"},
         {"version", kManifestVersion},
         {"task", std::string(to_string(model.task))},
         {"seed", model.seed},
         {"config_hash", model.config_hash},
         {"input_shape", model.input_shape()},
         {"input_quantizer", quantizer_json(model.input_quantizer)},
         {"layers", layers}};
  return j.dump(1) + "\n";
}

Model manifest_from_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "lutforge-manifest") {
      throw DataError("manifest: not a lutforge manifest");
    }
    const int version = j.at("version").get<int>();
    if (version != kManifestVersion) {
      throw DataError("manifest: unsupported version " + std::to_string(version));
    }
    const Shape in_shape = j.at("input_shape").get<Shape>();
    Model m(in_shape);
    m.task = parse_task(j.at("task").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.input_quantizer = quantizer_from(j.at("input_quantizer"), shape_size(in_shape), "input");
    for (const auto& lj : j.at("layers")) m.add_layer(layer_from(lj));
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("manifest: ") + e.what());
  } catch (const ShapeError& e) {
    throw DataError(std::string("manifest: ") + e.what());
  }
}

void save_manifest(const std::string& path, const Model& model) {
  write_file_atomic(path, manifest_to_string(model));
}

Model load_manifest(const std::string& path) {
  return manifest_from_string(read_file(path));
}

}  // namespace lutforge
