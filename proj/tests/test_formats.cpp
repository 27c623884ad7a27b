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

#include <doctest.h>

#include <cstring>

#include "mmg/encoder.hpp"
#include "mmg/ingest.hpp"
#include "mmg/sim_index.hpp"
#include "support/errors.hpp"
#include "support/files.hpp"
#include "support/tempdir.hpp"

using namespace mmg;
using mmg::testing::code_of;
using mmg::testing::reseal;
using mmg::testing::slurp;
using mmg::testing::spit;

namespace {

MultiModalGraph small_graph() {
  ImageRecord a{"img1", {1.0f, 0.1f, -0.5f}, {}, {"dog"}};
  ImageRecord b{"img2", {1.0f, 0.2f, -0.4f}, {}, {"dog", "white background"}};
  BuildConfig cfg;
  cfg.k_neighbors = 1;
  cfg.d_in = 3;
  return build_graph({a, b}, cfg);
}

EmbeddingTable small_table() {
  EmbeddingTable t;
  t.dim = 3;
  t.ids = {NodeId{0}, NodeId{1}, NodeId{4}};
  t.kinds = {NodeKind::kImage, NodeKind::kTag, NodeKind::kImage};
  t.values = {1, 2, 3, -1, 0.5f, 0, 1e-30f, -7, 3.25f};
  return t;
}

// Every corruption the readers must refuse, applied to a valid file.
template <typename Load>
void check_rejections(const std::filesystem::path& file, Load load) {
  const auto good = slurp(file);
  REQUIRE(good.size() > 16);
  const auto tmp = file.parent_path() / "corrupt.bin";

  auto flipped = good;
  flipped[good.size() / 2] ^= 0x40;
  spit(tmp, flipped);
  CHECK(code_of([&] { load(tmp); }) == ErrorCode::kChecksumMismatch);

  for (std::size_t cut : {good.size() - 1, good.size() / 2, std::size_t{6}, std::size_t{0}}) {
    spit(tmp, std::vector<std::uint8_t>(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut)));
    const ErrorCode c = code_of([&] { load(tmp); });
    CHECK((c == ErrorCode::kChecksumMismatch || c == ErrorCode::kIoFailure));
  }

  auto magic = good;
  magic[0] = 'X';
  spit(tmp, magic);
  CHECK(code_of([&] { load(tmp); }) == ErrorCode::kBadMagic);

  auto version = good;
  version[4] = 99;
  reseal(version);
  spit(tmp, version);
  CHECK(code_of([&] { load(tmp); }) == ErrorCode::kUnsupportedVersion);

  CHECK(code_of([&] { load(file.parent_path() / "does-not-exist"); }) == ErrorCode::kIoFailure);
}

}  // namespace

TEST_CASE("crc32 matches the standard check value") {
  const char* s = "123456789";
  const auto* p = reinterpret_cast<const std::uint8_t*>(s);
  CHECK(io::crc32(std::span(p, std::strlen(s))) == 0xCBF43926u);
}

TEST_CASE("byte reader and writer are little-endian and bounds-checked") {
  io::ByteWriter w;
  w.u32(0x01020304u);
  w.u64(0x1122334455667788ull);
  w.f32(-2.5f);
  w.str("héllo");
  const auto bytes = w.bytes();
  CHECK(bytes[0] == 0x04);
  CHECK(bytes[3] == 0x01);
  CHECK(bytes[4] == 0x88);
  io::ByteReader r(bytes);
  CHECK(r.u32() == 0x01020304u);
  CHECK(r.u64() == 0x1122334455667788ull);
  CHECK(r.f32() == -2.5f);
  CHECK(r.str() == "héllo");
  CHECK(r.at_end());
  CHECK(code_of([&] { r.u8(); }) == ErrorCode::kIoFailure);
}

TEST_CASE("graph files round-trip and reject corruption") {
  mmg::testing::TempDir dir;
  const MultiModalGraph g = small_graph();
  save_graph(g, dir / "g.mmgf");
  const MultiModalGraph back = load_graph(dir / "g.mmgf");
  CHECK(back == g);
  CHECK(back.frozen());
  CHECK(back.node_count() == 4);
  CHECK(back.edges() == g.edges());
  for (std::uint64_t i = 0; i < g.node_count(); ++i) {
    const auto a = g.feature(NodeId{i});
    const auto b = back.feature(NodeId{i});
    CHECK(std::memcmp(a.data(), b.data(), a.size_bytes()) == 0);
    CHECK(back.key(NodeId{i}) == g.key(NodeId{i}));
  }
  check_rejections(dir / "g.mmgf", [](const auto& p) { load_graph(p); });
}

TEST_CASE("weight files round-trip bit-exactly with their encoder settings") {
  mmg::testing::TempDir dir;
  EncoderConfig cfg;
  cfg.dims = {6, 4, 3};
  cfg.dropout = 0.35f;
  cfg.final_l2_normalize = false;
  cfg.fanouts = {7, 2};
  const auto params = init_params<float>(cfg.dims, 42);
  save_checkpoint(params, cfg, dir / "w.mmgw");
  const auto [back, back_cfg] = load_checkpoint(dir / "w.mmgw");
  CHECK(back_cfg == cfg);
  for (std::size_t m = 0; m < 4; ++m) {
    const auto& a = *params.matrices()[m];
    const auto& b = *back.matrices()[m];
    REQUIRE(a.rows() == b.rows());
    REQUIRE(a.cols() == b.cols());
    CHECK(std::memcmp(a.data(), b.data(), sizeof(float) * static_cast<std::size_t>(a.size())) == 0);
  }
  check_rejections(dir / "w.mmgw", [](const auto& p) { load_checkpoint(p); });
}

TEST_CASE("embedding files round-trip and reject corruption") {
  mmg::testing::TempDir dir;
  const EmbeddingTable t = small_table();
  save_embeddings(t, dir / "e.mmge");
  CHECK(load_embeddings(dir / "e.mmge") == t);
  check_rejections(dir / "e.mmge", [](const auto& p) { load_embeddings(p); });
}
