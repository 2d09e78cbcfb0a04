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

#include "lutforge/verify.hpp"

#include <cstdio>

#include "lutforge/error.hpp"
#include "lutforge/rtl.hpp"

namespace lutforge {

std::string VerifyResult::summary() const {
  if (mismatches == 0) return "bit-exact over " + std::to_string(vectors) + " vectors";
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%zu of %zu vectors mismatched; first at vector %zu output %zu: model %.17g, "
                "program %.17g",
                mismatches, vectors, first->vector, first->output, first->model_value,
                first->program_value);
  return buf;
}

Tensor decode_inputs(const IrProgram& p, const Shape& sample_shape,
                     std::span<const std::uint64_t> bits) {
  const std::size_t ni = p.n_inputs();
  if (shape_size(sample_shape) != ni) throw ShapeError("program inputs do not match the model input shape");
  const std::size_t rows = ni == 0 ? 0 : bits.size() / ni;
  Shape s{rows};
  s.insert(s.end(), sample_shape.begin(), sample_shape.end());
  Tensor x(s);
  for (std::size_t k = 0; k < bits.size(); ++k) x.data[k] = from_bits(bits[k], p.input_formats[k % ni]);
  return x;
}

VerifyResult verify(const Model& model, const IrProgram& p, std::size_t n, std::uint64_t seed) {
  if (p.n_inputs() != model.n_inputs() || p.n_outputs() != model.n_outputs()) {
    throw ShapeError("program ports do not match the model");
  }
  const auto diags = validate(p);
  if (!diags.empty()) throw IrError("invalid program:\n" + format_diagnostics(diags));
  const auto in = random_inputs(p, n, seed);
  const auto out = interpret_batch(p, in);
  VerifyResult r;
  r.vectors = n;
  const std::size_t no = p.n_outputs();
  // Chunked so memory stays bounded for large vector counts.
  constexpr std::size_t kChunk = 4096;
  for (std::size_t start = 0; start < n; start += kChunk) {
    const std::size_t len = std::min(kChunk, n - start);
    const Tensor x = decode_inputs(p, model.input_shape(),
                                   std::span(in).subspan(start * p.n_inputs(), len * p.n_inputs()));
    const Tensor y = model.forward_eval(x);
    for (std::size_t r0 = 0; r0 < len; ++r0) {
      bool bad = false;
      for (std::size_t o = 0; o < no; ++o) {
        const double prog = from_bits(out[(start + r0) * no + o], p.output_formats[o]);
        const double mod = y.data[r0 * no + o];
        if (prog != mod) {
          if (!r.first) r.first = Mismatch{start + r0, o, mod, prog};
          bad = true;
        }
      }
      if (bad) ++r.mismatches;
    }
  }
  return r;
}

}  // namespace lutforge
