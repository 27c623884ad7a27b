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

#include "mmg/binary_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "mmg/error.hpp"

namespace mmg::io {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large buffers.
  const std::uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::magic(std::string_view four_cc) {
  for (char c : four_cc) buf_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::f32s(std::span<const float> values) {
  buf_.reserve(buf_.size() + 4 * values.size());
  for (float v : values) f32(v);
}

void ByteWriter::finish_to_file(const std::filesystem::path& path) {
  const std::uint32_t crc = crc32(buf_);
  u32(crc);

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + tmp.string());
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "rename failed: " + ec.message());
  buf_.resize(buf_.size() - 4);
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes));
}

void ByteReader::need(std::size_t n) const {
  if (limit() < pos_ || limit() - pos_ < n) {
    throw Error(ErrorCode::kIoFailure, "unexpected end of file");
  }
}

void ByteReader::expect_header(std::string_view four_cc, std::uint32_t max_version,
                               std::uint32_t* version_out) {
  if (buf_.size() < four_cc.size()) {
    throw Error(ErrorCode::kIoFailure, "file truncated before its header");
  }
  if (!std::equal(four_cc.begin(), four_cc.end(), buf_.begin(),
                  [](char a, std::uint8_t b) { return static_cast<std::uint8_t>(a) == b; })) {
    throw Error(ErrorCode::kBadMagic, "expected magic " + std::string(four_cc));
  }
  pos_ = four_cc.size();
  const std::uint32_t version = u32();
  if (version == 0 || version > max_version) {
    throw Error(ErrorCode::kUnsupportedVersion, "version " + std::to_string(version));
  }
  if (version_out != nullptr) *version_out = version;

  if (buf_.size() < pos_ + 4) {
    throw Error(ErrorCode::kChecksumMismatch, "file too short for checksum");
  }
  const std::size_t body = buf_.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t{buf_[body + i]} << (8 * i);
  if (crc32(std::span(buf_.data(), body)) != stored) {
    throw Error(ErrorCode::kChecksumMismatch, "CRC32 mismatch");
  }
  checked_ = true;
}

std::uint8_t ByteReader::u8() {
  need(1);
  return buf_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{buf_[pos_ + i]} << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf_[pos_ + i]} << (8 * i);
  pos_ += 8;
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  need(n);
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
  pos_ += n;
  return s;
}

void ByteReader::f32s(std::span<float> out) {
  need(4 * out.size());
  for (float& v : out) v = f32();
}

}  // namespace mmg::io
