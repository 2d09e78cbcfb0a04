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
#include <string_view>

namespace lutforge {

std::string read_file(const std::string& path);

// Writes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::string& path, std::string_view bytes);

// Little-endian byte packing.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { put(v, 2); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void i32(std::int32_t v) { put(static_cast<std::uint32_t>(v), 4); }
  void i64(std::int64_t v) { put(static_cast<std::uint64_t>(v), 8); }
  void f32(float v);
  void f64(double v);
  void bytes(std::string_view s) { buf_.append(s); }
  const std::string& str() const noexcept { return buf_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int k = 0; k < n; ++k) buf_.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }
  std::string buf_;
};

// Throws DataError on truncated input.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(get(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  std::int32_t i32() { return static_cast<std::int32_t>(static_cast<std::uint32_t>(get(4))); }
  std::int64_t i64() { return static_cast<std::int64_t>(get(8)); }
  float f32();
  double f64();
  std::string_view bytes(std::size_t n);
  std::size_t offset() const noexcept { return pos_; }
  bool done() const noexcept { return pos_ == data_.size(); }

 private:
  std::uint64_t get(int n);
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string base64_encode(std::string_view bytes);
// Throws DataError on malformed input.
std::string base64_decode(std::string_view text);

}  // namespace lutforge
