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

#include "lutforge/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>

#include "lutforge/error.hpp"
#include "lutforge/io.hpp"

namespace lutforge {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct Table {
  std::vector<std::string> header;
  std::size_t rows = 0;
  std::vector<double> values;  // rows x header.size()
};

Table parse_csv(const std::string& text, const std::string& path) {
  Table t;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool have_header = false;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto fields = split_fields(line);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(t.header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto res = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || res.ec != std::errc() || res.ptr != f.data() + f.size() ||
          !std::isfinite(v)) {
        throw DataError(path + ":" + std::to_string(line_no) + ": invalid value '" +
                        std::string(f) + "' in column '" + t.header[c] + "'");
      }
      t.values.push_back(v);
    }
    ++t.rows;
    if (end == text.size()) break;
  }
  if (!have_header) throw DataError(path + ": empty file (a header row is required)");
  return t;
}

Table table_from_tensor(const Tensor& raw, const std::string& path) {
  if (raw.rank() != 2) throw DataError(path + ": raw tensor dataset must be 2-D");
  Table t;
  t.rows = raw.shape[0];
  for (std::size_t c = 0; c < raw.shape[1]; ++c) t.header.push_back(std::to_string(c));
  t.values = raw.data;
  return t;
}

std::size_t column_index(const Table& t, const std::string& name) {
  const auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) throw DataError("unknown column '" + name + "'");
  return static_cast<std::size_t>(it - t.header.begin());
}

}  // namespace

SplitIndices make_split(std::size_t n, double val_fraction, double test_fraction,
                        std::uint64_t seed) {
  if (val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0) {
    throw UsageError("split fractions must be non-negative and sum below 1");
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle.
  for (std::size_t k = n; k > 1; --k) {
    const std::size_t r = static_cast<std::size_t>(rng() % k);
    std::swap(perm[k - 1], perm[r]);
  }
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * n));
  SplitIndices s;
  s.test.assign(perm.begin(), perm.begin() + n_test);
  s.val.assign(perm.begin() + n_test, perm.begin() + n_test + n_val);
  s.train.assign(perm.begin() + n_test + n_val, perm.end());
  for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
  return s;
}

void check_disjoint(const SplitIndices& s) {
  std::vector<std::pair<std::size_t, int>> all;
  for (auto r : s.train) all.emplace_back(r, 0);
  for (auto r : s.val) all.emplace_back(r, 1);
  for (auto r : s.test) all.emplace_back(r, 2);
  std::sort(all.begin(), all.end());
  for (std::size_t k = 1; k < all.size(); ++k) {
    if (all[k].first == all[k - 1].first) {
      static constexpr const char* kNames[] = {"train", "val", "test"};
      throw DataError("row " + std::to_string(all[k].first) + " appears in both " +
                      kNames[all[k - 1].second] + " and " + kNames[all[k].second] +
                      " splits");
    }
  }
}

Dataset ingest(const DatasetSpec& spec) {
  const Table t = spec.format == DataFormat::kCsv
                      ? parse_csv(read_file(spec.path), spec.path)
                      : table_from_tensor(load_lftd(spec.path), spec.path);
  if (t.rows == 0) throw DataError(spec.path + ": no data rows");
  const std::size_t cols = t.header.size();

  std::size_t label_col = cols - 1;
  if (!spec.label_column.empty()) label_col = column_index(t, spec.label_column);
  std::vector<std::size_t> feat_cols;
  if (spec.feature_columns.empty()) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c != label_col) feat_cols.push_back(c);
    }
  } else {
    for (const auto& name : spec.feature_columns) feat_cols.push_back(column_index(t, name));
  }
  const std::size_t nf = feat_cols.size();
  if (nf == 0) throw DataError(spec.path + ": no feature columns");
  Shape sample = spec.sample_shape.empty() ? Shape{nf} : spec.sample_shape;
  if (shape_size(sample) != nf) {
    throw DataError("sample shape " + shape_string(sample) + " does not hold " +
                    std::to_string(nf) + " features");
  }

  Dataset ds;
  ds.task = spec.task;
  if (spec.task == Task::kClassification) {
    std::size_t max_label = 0;
    for (std::size_t r = 0; r < t.rows; ++r) {
      const double v = t.values[r * cols + label_col];
      if (v < 0.0 || v != std::floor(v)) {
        throw DataError(spec.path + ": row " + std::to_string(r + 1) +
                        ": class label must be a non-negative integer, got " +
                        std::to_string(v));
      }
      max_label = std::max(max_label, static_cast<std::size_t>(v));
    }
    ds.n_classes = max_label + 1;
    if (spec.n_classes != 0 && ds.n_classes > spec.n_classes) {
      throw DataError(spec.path + ": found " + std::to_string(ds.n_classes) +
                      " classes, expected " + std::to_string(spec.n_classes));
    }
    if (spec.n_classes != 0) ds.n_classes = spec.n_classes;
  }

  const SplitIndices s = make_split(t.rows, spec.val_fraction, spec.test_fraction, spec.split_seed);
  check_disjoint(s);
  if (s.train.empty()) throw DataError(spec.path + ": training split is empty");
  ds.train_rows = s.train;
  ds.val_rows = s.val;
  ds.test_rows = s.test;

  ds.mean.assign(nf, 0.0);
  ds.stddev.assign(nf, 1.0);
  if (spec.standardize) {
    for (std::size_t f = 0; f < nf; ++f) {
      double m = 0.0;
      for (auto r : s.train) m += t.values[r * cols + feat_cols[f]];
      m /= static_cast<double>(s.train.size());
      double v = 0.0;
      for (auto r : s.train) {
        const double d = t.values[r * cols + feat_cols[f]] - m;
        v += d * d;
      }
      v /= static_cast<double>(s.train.size());
      ds.mean[f] = m;
      ds.stddev[f] = v > 0.0 ? std::sqrt(v) : 1.0;
    }
  }

  auto build = [&](const std::vector<std::size_t>& rows) {
    Shape xs{rows.size()};
    xs.insert(xs.end(), sample.begin(), sample.end());
    Split sp{Tensor(xs), Tensor(Shape{rows.size(), 1})};
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const std::size_t r = rows[k];
      for (std::size_t f = 0; f < nf; ++f) {
        sp.x.data[k * nf + f] = (t.values[r * cols + feat_cols[f]] - ds.mean[f]) / ds.stddev[f];
      }
      sp.y.data[k] = t.values[r * cols + label_col];
    }
    return sp;
  };
  ds.train = build(s.train);
  ds.val = build(s.val);
  ds.test = build(s.test);

  if (!spec.cache_path.empty()) {
    Tensor cache(Shape{t.rows, nf + 1});
    for (std::size_t r = 0; r < t.rows; ++r) {
      for (std::size_t f = 0; f < nf; ++f) {
        cache.data[r * (nf + 1) + f] = (t.values[r * cols + feat_cols[f]] - ds.mean[f]) / ds.stddev[f];
      }
      cache.data[r * (nf + 1) + nf] = t.values[r * cols + label_col];
    }
    save_lftd(spec.cache_path, cache);
  }
  return ds;
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (auto b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {
std::uint64_t fnv1a_str(std::string_view s) {
  return lutforge::fnv1a(std::span<const std::uint8_t>(
      reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}
}  // namespace

void save_lftd(const std::string& path, const Tensor& t) {
  ByteWriter w;
  w.bytes("LFTD");
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape) w.u64(d);
  for (double v : t.data) w.f32(static_cast<float>(v));
  const std::uint64_t sum = fnv1a_str(w.str());
  w.u64(sum);
  write_file_atomic(path, w.str());
}

Tensor load_lftd(const std::string& path) {
  const std::string bytes = read_file(path);
  ByteReader r(bytes, path);
  if (r.bytes(4) != "LFTD") throw DataError(path + ": bad magic (expected LFTD)");
  const std::uint32_t ndim = r.u32();
  if (ndim > 16) throw DataError(path + ": implausible rank " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& d : shape) d = r.u64();
  const std::size_t n = shape_size(shape);
  if (n > (bytes.size() / 4)) throw DataError(path + ": payload shorter than header dims");
  std::vector<double> data(n);
  for (auto& v : data) v = r.f32();
  const std::size_t body = r.offset();
  const std::uint64_t stored = r.u64();
  if (!r.done()) throw DataError(path + ": trailing bytes after checksum");
  if (stored != fnv1a_str(std::string_view(bytes).substr(0, body))) {
    throw DataError(path + ": checksum mismatch");
  }
  return Tensor(std::move(shape), std::move(data));
}

double metric_accuracy(const Tensor& outputs, std::span<const double> labels) {
  const std::size_t rows = outputs.batch();
  if (rows == 0) throw DataError("accuracy of an empty batch");
  if (labels.size() != rows) throw ShapeError("accuracy: label count does not match outputs");
  const std::size_t c = outputs.size() / rows;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* o = &outputs.data[r * c];
    const std::size_t arg = static_cast<std::size_t>(std::max_element(o, o + c) - o);
    if (static_cast<double>(arg) == labels[r]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rows);
}

namespace {
void mean_sem(std::span<const double> x, double& mean, double& sem) {
  mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  sem = 0.0;
  if (x.size() < 2) return;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(x.size() - 1));
  sem = sd / std::sqrt(static_cast<double>(x.size()));
}
}  // namespace

std::optional<double> metric_separation(std::span<const double> counts_k,
                                        std::span<const double> counts_p) {
  if (counts_k.empty() || counts_p.empty()) {
    throw DataError("separation power needs two non-empty groups");
  }
  double mk = 0.0, sk = 0.0, mp = 0.0, sp = 0.0;
  mean_sem(counts_k, mk, sk);
  mean_sem(counts_p, mp, sp);
  const double denom = (sk + sp) / 2.0;
  if (denom == 0.0) return std::nullopt;
  return (mk - mp) / denom;
}

double metric_mse(const Tensor& outputs, const Tensor& targets) {
  if (outputs.size() != targets.size() || outputs.size() == 0) {
    throw ShapeError("mse: outputs and targets must be equal-sized and non-empty");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const double d = outputs.data[k] - targets.data[k];
    s += d * d;
  }
  return s / static_cast<double>(outputs.size());
}

}  // namespace lutforge
