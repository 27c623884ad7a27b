/* Copyright 2026 The mmgraph Authors.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mmg::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

// Little-endian byte sink. finish() appends the CRC32 of everything written.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void magic(std::string_view four_cc);
  void str(std::string_view s);  // u32 length prefix, raw UTF-8 bytes
  void f32s(std::span<const float> values);

  const std::vector<std::uint8_t>& bytes() const { return buf_; }

  // Appends the trailing checksum and writes atomically to `path`.
  void finish_to_file(const std::filesystem::path& path);

 private:
  std::vector<std::uint8_t> buf_;
};

// Bounds-checked little-endian reader over an in-memory file image. Reading
// past the end throws IoFailure.
class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

  static ByteReader from_file(const std::filesystem::path& path);

  // Checks magic, then version, then the trailing CRC32. After this call the
  // readable range excludes the checksum.
  void expect_header(std::string_view four_cc, std::uint32_t max_version,
                     std::uint32_t* version_out = nullptr);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  std::string str();
  void f32s(std::span<float> out);

  bool at_end() const { return pos_ == limit(); }
  std::size_t remaining() const { return limit() - pos_; }

 private:
  std::size_t limit() const { return checked_ ? buf_.size() - 4 : buf_.size(); }
  void need(std::size_t n) const;

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  bool checked_ = false;
};

}  // namespace mmg::io
