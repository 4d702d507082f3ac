// Copyright 2026 The Preictal Authors.
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

// Little-endian byte buffers used by the record, spectrogram and checkpoint
// formats.

#ifndef PREICTAL_SRC_BINARY_IO_HPP_
#define PREICTAL_SRC_BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "preictal/error.hpp"

namespace preictal::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats are written with native little-endian stores");

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }

  void put_bytes(std::string_view s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void put_string16(std::string_view s) {
    if (s.size() > 0xFFFF) throw IoError("string too long for u16 length prefix");
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    put_bytes(s);
  }

  template <typename T>
  void put_array(std::span<const T> values) {
    const auto* p = reinterpret_cast<const char*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }

  const std::vector<char>& bytes() const { return bytes_; }

  // Writes through a temporary file and renames so readers never observe a
  // partially written file.
  void save(const std::filesystem::path& path) const {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot open for writing: " + tmp.string());
      out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
      if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
  }

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  static ByteReader load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                            std::istreambuf_iterator<char>());
    return ByteReader(std::move(bytes));
  }

  template <typename T>
  T get(const char* what) {
    require(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    require(n, what);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  std::string get_string16(const char* what) {
    const auto n = get<std::uint16_t>(what);
    return get_bytes(n, what);
  }

  template <typename T>
  void get_array(std::span<T> out, const char* what) {
    require(out.size_bytes(), what);
    std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
    pos_ += out.size_bytes();
  }

  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void require(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string("truncated while reading ") + what, pos_);
    }
  }

  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace preictal::detail

#endif  // PREICTAL_SRC_BINARY_IO_HPP_
