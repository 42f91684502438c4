// Copyright 2026 The vflr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Big-endian byte buffers. Every multi-byte field written by this project
// goes through ByteWriter and is read back through ByteReader.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "vflr/errors.hpp"

namespace vflr {

using Bytes = std::vector<std::uint8_t>;
using BigInt = mpz_class;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }

  void u32(std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  void u64(std::uint64_t v) {
    for (int shift = 56; shift >= 0; shift -= 8) out_.push_back(static_cast<std::uint8_t>(v >> shift));
  }

  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  void raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

  // 4-byte length || big-endian magnitude. Sign is not recorded.
  void magnitude(const BigInt& v) {
    const Bytes mag = magnitude_bytes(v);
    u32(static_cast<std::uint32_t>(mag.size()));
    raw(mag);
  }

  // 4-byte length || big-endian magnitude || sign byte (0 = non-negative, 1 = negative).
  void integer(const BigInt& v) {
    magnitude(v);
    u8(sgn(v) < 0 ? 1 : 0);
  }

  const Bytes& bytes() const { return out_; }
  Bytes take() { return std::move(out_); }

  static Bytes magnitude_bytes(const BigInt& v) {
    if (sgn(v) == 0) return {};
    const std::size_t count = (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
    Bytes mag(count);
    std::size_t written = 0;
    mpz_export(mag.data(), &written, 1, 1, 1, 0, v.get_mpz_t());
    mag.resize(written);
    return mag;
  }

 private:
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  std::uint8_t u8() {
    need(1);
    return data_[pos_++];
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
    return v;
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
  }

  BigInt magnitude() {
    const std::uint32_t len = u32();
    const auto mag = raw(len);
    BigInt v;
    if (len > 0) mpz_import(v.get_mpz_t(), len, 1, 1, 1, 0, mag.data());
    return v;
  }

  BigInt integer() {
    BigInt v = magnitude();
    const std::uint8_t sign = u8();
    if (sign > 1) throw ParseError("integer: bad sign byte");
    if (sign == 1) v = -v;
    return v;
  }

  // Guards count fields against absurd values before allocating.
  std::uint32_t count(std::size_t min_element_bytes) {
    const std::uint32_t n = u32();
    if (min_element_bytes > 0 && static_cast<std::size_t>(n) > remaining() / min_element_bytes) {
      throw ParseError("count field exceeds remaining payload");
    }
    return n;
  }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) throw ParseError("unexpected end of data");
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

inline Bytes read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to " + path);
}

}  // namespace vflr
