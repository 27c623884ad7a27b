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

#include "mmg/encoder.hpp"

#include "mmg/binary_io.hpp"

namespace mmg {
namespace {

constexpr std::string_view kWeightsMagic = "MMGW";
constexpr std::uint32_t kWeightsVersion = 1;

}  // namespace

void EncoderConfig::validate() const {
  if (dims.d_in == 0 || dims.d1 == 0 || dims.d2 == 0) {
    throw Error(ErrorCode::kInvalidConfig, "encoder dims must be positive");
  }
  if (!(dropout >= 0.0f && dropout < 1.0f)) {
    throw Error(ErrorCode::kInvalidConfig, "dropout must lie in [0, 1)");
  }
  if (fanouts.size() != 2 || fanouts[0] == 0 || fanouts[1] == 0) {
    throw Error(ErrorCode::kInvalidConfig, "fanouts must be two positive integers");
  }
}

double pair_loss(std::span<const float> z_u, std::span<const float> z_v,
                 const std::vector<std::span<const float>>& z_neg) {
  auto dot = [&](std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::kShapeMismatch, "embedding widths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!std::isfinite(a[i]) || !std::isfinite(b[i])) {
        throw Error(ErrorCode::kNonFiniteInput, "embedding entry");
      }
      s += double{a[i]} * double{b[i]};
    }
    return s;
  };
  double j = softplus(-dot(z_u, z_v));
  for (const auto& n : z_neg) j += softplus(dot(z_u, n));
  return j;
}

void save_checkpoint(const EncoderParams<float>& params, const EncoderConfig& cfg,
                     const std::filesystem::path& path) {
  cfg.validate();
  params.check_shapes(cfg.dims);
  io::ByteWriter w;
  w.magic(kWeightsMagic);
  w.u32(kWeightsVersion);
  w.f32(cfg.dropout);
  w.u8(cfg.final_l2_normalize ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(cfg.fanouts.size()));
  for (auto f : cfg.fanouts) w.u32(f);
  w.u32(cfg.dims.d_in);
  w.u32(cfg.dims.d1);
  w.u32(cfg.dims.d2);
  for (const Mat<float>* m : params.matrices()) {
    w.f32s(std::span<const float>(m->data(), static_cast<std::size_t>(m->size())));
  }
  w.finish_to_file(path);
}

std::pair<EncoderParams<float>, EncoderConfig> load_checkpoint(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_header(kWeightsMagic, kWeightsVersion);
  EncoderConfig cfg;
  cfg.dropout = r.f32();
  cfg.final_l2_normalize = r.u8() != 0;
  const std::uint32_t nf = r.u32();
  if (nf > 16) throw Error(ErrorCode::kParseError, "implausible fanout count");
  cfg.fanouts.resize(nf);
  for (auto& f : cfg.fanouts) f = r.u32();
  cfg.dims.d_in = r.u32();
  cfg.dims.d1 = r.u32();
  cfg.dims.d2 = r.u32();
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  auto params = EncoderParams<float>::zeros(cfg.dims);
  for (Mat<float>* m : params.matrices()) {
    r.f32s(std::span<float>(m->data(), static_cast<std::size_t>(m->size())));
  }
  if (!r.at_end()) throw Error(ErrorCode::kParseError, "trailing bytes in checkpoint");
  return {std::move(params), std::move(cfg)};
}

}  // namespace mmg
