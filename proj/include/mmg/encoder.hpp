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

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmg/error.hpp"
#include "mmg/graph.hpp"
#include "mmg/sampler.hpp"

namespace mmg {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

struct EncoderDims {
  std::uint32_t d_in = 512;
  std::uint32_t d1 = 128;
  std::uint32_t d2 = 128;

  std::uint32_t out_width() const { return 2 * d2; }
  friend bool operator==(const EncoderDims&, const EncoderDims&) = default;
};

// Layer 1 uses a rectifier, layer 2 is linear. Outputs are l2-normalized when
// final_l2_normalize is set, so dot products are cosines.
struct EncoderConfig {
  EncoderDims dims;
  float dropout = 0.2f;
  bool final_l2_normalize = true;
  // Neighbor truncation for deterministic (inference) neighborhoods.
  std::vector<std::uint32_t> fanouts = {25, 10};

  void validate() const;
  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Weights are stored input-major: a row vector times W gives the output.
template <typename S>
struct EncoderParams {
  Mat<S> self1;   // d_in x d1
  Mat<S> neigh1;  // d_in x d1
  Mat<S> self2;   // 2*d1 x d2
  Mat<S> neigh2;  // 2*d1 x d2

  static EncoderParams zeros(const EncoderDims& d) {
    EncoderParams p;
    p.self1 = Mat<S>::Zero(d.d_in, d.d1);
    p.neigh1 = Mat<S>::Zero(d.d_in, d.d1);
    p.self2 = Mat<S>::Zero(2 * d.d1, d.d2);
    p.neigh2 = Mat<S>::Zero(2 * d.d1, d.d2);
    return p;
  }

  EncoderDims dims() const {
    return {static_cast<std::uint32_t>(self1.rows()), static_cast<std::uint32_t>(self1.cols()),
            static_cast<std::uint32_t>(self2.cols())};
  }

  std::array<Mat<S>*, 4> matrices() { return {&self1, &neigh1, &self2, &neigh2}; }
  std::array<const Mat<S>*, 4> matrices() const { return {&self1, &neigh1, &self2, &neigh2}; }

  template <typename T>
  EncoderParams<T> cast() const {
    return {self1.template cast<T>(), neigh1.template cast<T>(), self2.template cast<T>(),
            neigh2.template cast<T>()};
  }

  bool all_finite() const {
    return self1.allFinite() && neigh1.allFinite() && self2.allFinite() && neigh2.allFinite();
  }

  void check_shapes(const EncoderDims& d) const {
    const auto ok = [](const Mat<S>& m, Eigen::Index r, Eigen::Index c) {
      return m.rows() == r && m.cols() == c;
    };
    if (!ok(self1, d.d_in, d.d1) || !ok(neigh1, d.d_in, d.d1) || !ok(self2, 2 * d.d1, d.d2) ||
        !ok(neigh2, 2 * d.d1, d.d2)) {
      throw Error(ErrorCode::kShapeMismatch, "encoder parameters do not match dims");
    }
  }
};

// Glorot uniform, bound sqrt(6 / (fan_in + fan_out)). Values are drawn in
// double so float and double instantiations agree up to rounding.
template <typename S>
EncoderParams<S> init_params(const EncoderDims& dims, std::uint64_t seed) {
  EncoderParams<S> p = EncoderParams<S>::zeros(dims);
  Rng rng(seed);
  for (Mat<S>* m : p.matrices()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(m->rows() + m->cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = static_cast<S>(u(rng));
  }
  return p;
}

enum class Mode { kTrain, kInfer };

// Everything the backward pass needs, kept from one forward call.
template <typename S>
struct ForwardCache {
  std::vector<NodeId> local_nodes;  // sorted, unique
  std::vector<std::int64_t> root_row, hop1_row, hop2_row;  // -1 for empty slots
  std::vector<std::int64_t> hop1_slot;  // position in hop1, -1 for empty slots
  std::vector<std::uint32_t> hop1_offsets, hop2_offsets;

  Mat<S> x;                   // local rows x d_in, after input dropout
  Mat<S> p_self, p_neigh;     // x * W
  Mat<S> gate_root, gate_hop; // d h1 / d pre: rectifier indicator times dropout scale
  Mat<S> h1_root, h1_hop;     // layer-1 outputs after dropout
  Mat<S> agg2;                // mean of hop-1 children per root
  Mat<S> h2;                  // pre-normalization output
  std::vector<S> norms;
  Mat<S> z;                   // final embeddings, one row per root
  mutable Mat<S> scratch;     // backward workspace
};

namespace detail {

// Inverted-dropout mask. Keep decisions use 16-bit slices of a splitmix64
// stream seeded from `rng`, so one draw from `rng` covers the whole mask.
template <typename S>
void dropout_mask(Mat<S>& mask, Eigen::Index rows, Eigen::Index cols, double rate, Rng& rng) {
  mask.resize(rows, cols);
  const auto threshold =
      std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::llround((1.0 - rate) * 65536.0)));
  const S scale = static_cast<S>(65536.0 / static_cast<double>(threshold));
  std::uint64_t state = rng();
  S* out = mask.data();
  const Eigen::Index n = mask.size();
  const auto next = [&state] {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  const auto pick = [&](std::uint64_t z, int b) {
    return ((z >> (16 * b)) & 0xffffu) < threshold ? scale : S(0);
  };
  Eigen::Index i = 0;
  for (; i + 4 <= n; i += 4) {
    const std::uint64_t z = next();
    out[i] = pick(z, 0);
    out[i + 1] = pick(z, 1);
    out[i + 2] = pick(z, 2);
    out[i + 3] = pick(z, 3);
  }
  if (i < n) {
    const std::uint64_t z = next();
    for (int b = 0; i < n; ++i, ++b) out[i] = pick(z, b);
  }
}

// Turns `pre` into relu(pre) * gate in place and leaves the combined
// derivative in `gate`. Without `masked` the incoming gate contents are ignored.
template <typename S>
void rectify(Mat<S>& pre, Mat<S>& gate, bool masked) {
  gate.resize(pre.rows(), pre.cols());
  S* p = pre.data();
  S* g = gate.data();
  for (Eigen::Index i = 0; i < pre.size(); ++i) {
    const S keep = p[i] > S(0) ? (masked ? g[i] : S(1)) : S(0);
    g[i] = keep;
    p[i] *= keep;
  }
}

inline std::int64_t local_row(const std::vector<NodeId>& nodes, NodeId v) {
  if (v == kEmptySlot) return -1;
  auto it = std::lower_bound(nodes.begin(), nodes.end(), v);
  return it - nodes.begin();
}

// Mean of the rows of `src` listed in rows[begin, end) (skipping -1),
// written to dst[0, src.cols()). Returns the number of rows used.
template <typename S>
std::size_t mean_rows(const Mat<S>& src, const std::vector<std::int64_t>& rows,
                      std::uint32_t begin, std::uint32_t end, S* dst) {
  const Eigen::Index n = src.cols();
  Eigen::Map<RowVec<S>> out(dst, n);
  out.setZero();
  std::size_t count = 0;
  for (std::uint32_t k = begin; k < end; ++k) {
    if (rows[k] < 0) continue;
    out += Eigen::Map<const RowVec<S>>(src.data() + rows[k] * n, n);
    ++count;
  }
  if (count > 0) out /= static_cast<S>(count);
  return count;
}

// Adjoint of mean_rows: adds grad / count into target(k) for every used k.
template <typename S, typename Target>
void spread_rows(const S* grad, Eigen::Index n, const std::vector<std::int64_t>& rows,
                 std::uint32_t begin, std::uint32_t end, Target target) {
  std::size_t count = 0;
  for (std::uint32_t k = begin; k < end; ++k) count += rows[k] >= 0;
  if (count == 0) return;
  const RowVec<S> share = Eigen::Map<const RowVec<S>>(grad, n) / static_cast<S>(count);
  for (std::uint32_t k = begin; k < end; ++k) {
    if (rows[k] >= 0) Eigen::Map<RowVec<S>>(target(k), n) += share;
  }
}

}  // namespace detail

// Two-layer mean-aggregator forward pass over a layered sample, reusing the
// buffers already held by `c`. `virtual_feature` supplies the input for
// kVirtualNode roots.
template <typename S>
void forward_into(ForwardCache<S>& c, const EncoderParams<S>& params, const EncoderConfig& cfg,
                  const MultiModalGraph& g, const LayeredSample& sample, Mode mode,
                  Rng* rng = nullptr, std::span<const float> virtual_feature = {}) {
  const EncoderDims d = params.dims();
  if (d.d_in != g.d_in()) throw Error(ErrorCode::kShapeMismatch, "feature dim != encoder d_in");
  if (sample.hop1_offsets.size() != sample.roots.size() + 1 ||
      sample.hop2_offsets.size() != sample.hop1.size() + 1) {
    throw Error(ErrorCode::kShapeMismatch, "malformed layered sample");
  }
  const bool dropout = mode == Mode::kTrain && cfg.dropout > 0.0f;
  if (dropout && rng == nullptr) throw Error(ErrorCode::kInvalidConfig, "dropout needs an rng");

  c.hop1_offsets = sample.hop1_offsets;
  c.hop2_offsets = sample.hop2_offsets;

  auto& nodes = c.local_nodes;
  nodes.clear();
  nodes.reserve(sample.roots.size() + sample.hop1.size());
  for (const auto* level : {&sample.roots, &sample.hop1, &sample.hop2}) {
    for (NodeId v : *level) {
      if (v != kEmptySlot) nodes.push_back(v);
    }
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  auto rows_of = [&](const std::vector<NodeId>& level, std::vector<std::int64_t>& out) {
    out.resize(level.size());
    for (std::size_t i = 0; i < level.size(); ++i) out[i] = detail::local_row(nodes, level[i]);
  };
  rows_of(sample.roots, c.root_row);
  rows_of(sample.hop1, c.hop1_row);
  rows_of(sample.hop2, c.hop2_row);
  c.hop1_slot.resize(c.hop1_row.size());
  for (std::size_t k = 0; k < c.hop1_row.size(); ++k) {
    c.hop1_slot[k] = c.hop1_row[k] < 0 ? -1 : static_cast<std::int64_t>(k);
  }
  for (std::int64_t r : c.root_row) {
    if (r < 0) throw Error(ErrorCode::kShapeMismatch, "a root cannot be an empty slot");
  }

  const auto L = static_cast<Eigen::Index>(nodes.size());
  c.x.resize(L, d.d_in);
  for (Eigen::Index i = 0; i < L; ++i) {
    std::span<const float> f;
    if (nodes[i] == kVirtualNode) {
      if (virtual_feature.size() != d.d_in) {
        throw Error(ErrorCode::kShapeMismatch, "virtual node needs a d_in feature");
      }
      f = virtual_feature;
    } else {
      f = g.feature(nodes[i]);
    }
    for (std::uint32_t k = 0; k < d.d_in; ++k) c.x(i, k) = static_cast<S>(f[k]);
  }
  if (dropout) {
    Mat<S> mask;
    detail::dropout_mask(mask, L, d.d_in, cfg.dropout, *rng);
    c.x.array() *= mask.array();
  }

  c.p_self.noalias() = c.x * params.self1;
  c.p_neigh.noalias() = c.x * params.neigh1;

  const auto R = static_cast<Eigen::Index>(sample.roots.size());
  const auto H = static_cast<Eigen::Index>(sample.hop1.size());
  const Eigen::Index d1 = d.d1;

  Mat<S>& pre_root = c.h1_root;
  pre_root.resize(R, 2 * d1);
  for (Eigen::Index r = 0; r < R; ++r) {
    pre_root.block(r, 0, 1, d1) = c.p_self.row(c.root_row[r]);
    detail::mean_rows(c.p_neigh, c.hop1_row, c.hop1_offsets[r], c.hop1_offsets[r + 1],
                      pre_root.row(r).data() + d1);
  }
  Mat<S>& pre_hop = c.h1_hop;
  pre_hop.resize(H, 2 * d1);
  for (Eigen::Index j = 0; j < H; ++j) {
    if (c.hop1_row[j] < 0) {
      pre_hop.row(j).setZero();
      continue;
    }
    pre_hop.block(j, 0, 1, d1) = c.p_self.row(c.hop1_row[j]);
    detail::mean_rows(c.p_neigh, c.hop2_row, c.hop2_offsets[j], c.hop2_offsets[j + 1],
                      pre_hop.row(j).data() + d1);
  }

  if (dropout) {
    detail::dropout_mask(c.gate_root, R, 2 * d1, cfg.dropout, *rng);
    detail::dropout_mask(c.gate_hop, H, 2 * d1, cfg.dropout, *rng);
  }
  detail::rectify(c.h1_root, c.gate_root, dropout);
  detail::rectify(c.h1_hop, c.gate_hop, dropout);

  c.agg2.resize(R, 2 * d1);
  for (Eigen::Index r = 0; r < R; ++r) {
    detail::mean_rows(c.h1_hop, c.hop1_slot, c.hop1_offsets[r], c.hop1_offsets[r + 1],
                      c.agg2.row(r).data());
  }

  const Eigen::Index d2 = d.d2;
  c.h2.resize(R, 2 * d2);
  c.h2.leftCols(d2).noalias() = c.h1_root * params.self2;
  c.h2.rightCols(d2).noalias() = c.agg2 * params.neigh2;

  c.z = c.h2;
  c.norms.assign(R, S(1));
  if (cfg.final_l2_normalize) {
    for (Eigen::Index r = 0; r < R; ++r) {
      const S n = c.h2.row(r).norm();
      c.norms[r] = n;
      if (n > S(0)) c.z.row(r) /= n;
    }
  }
  if (!c.z.allFinite()) throw Error(ErrorCode::kNonFiniteActivation, "non-finite embedding");
}

template <typename S>
ForwardCache<S> forward(const EncoderParams<S>& params, const EncoderConfig& cfg,
                        const MultiModalGraph& g, const LayeredSample& sample, Mode mode,
                        Rng* rng = nullptr, std::span<const float> virtual_feature = {}) {
  ForwardCache<S> c;
  forward_into(c, params, cfg, g, sample, mode, rng, virtual_feature);
  return c;
}

// Gradient of a scalar objective with respect to every weight, given the
// objective's gradient with respect to the root embeddings (rows of cache.z).
template <typename S>
EncoderParams<S> backward(const EncoderParams<S>& params, const EncoderConfig& cfg,
                          const ForwardCache<S>& c, const Mat<S>& dz) {
  const EncoderDims d = params.dims();
  const Eigen::Index R = c.z.rows();
  const Eigen::Index H = c.h1_hop.rows();
  const Eigen::Index d1 = d.d1;
  const Eigen::Index d2 = d.d2;
  if (dz.rows() != R || dz.cols() != 2 * d2) {
    throw Error(ErrorCode::kShapeMismatch, "dz does not match the forward roots");
  }

  EncoderParams<S> grad;

  // Through z = h2 / |h2|.
  Mat<S> dh2 = dz;
  if (cfg.final_l2_normalize) {
    for (Eigen::Index r = 0; r < R; ++r) {
      const S n = c.norms[r];
      if (n > S(0)) {
        const S proj = c.z.row(r).dot(dz.row(r));
        dh2.row(r) = (dz.row(r) - proj * c.z.row(r)) / n;
      } else {
        dh2.row(r).setZero();
      }
    }
  }

  const auto da = dh2.leftCols(d2);
  const auto db = dh2.rightCols(d2);
  grad.self2.noalias() = c.h1_root.transpose() * da;
  grad.neigh2.noalias() = c.agg2.transpose() * db;
  Mat<S> dh1_root = da * params.self2.transpose();
  const Mat<S> dagg2 = db * params.neigh2.transpose();

  Mat<S>& dh1_hop = c.scratch;
  dh1_hop.setZero(H, 2 * d1);
  for (Eigen::Index r = 0; r < R; ++r) {
    detail::spread_rows(dagg2.row(r).data(), 2 * d1, c.hop1_slot, c.hop1_offsets[r],
                        c.hop1_offsets[r + 1], [&](std::uint32_t k) { return dh1_hop.row(k).data(); });
  }

  dh1_root.array() *= c.gate_root.array();
  dh1_hop.array() *= c.gate_hop.array();

  Mat<S> dp_self = Mat<S>::Zero(c.x.rows(), d1);
  Mat<S> dp_neigh = Mat<S>::Zero(c.x.rows(), d1);
  auto scatter = [&](const Mat<S>& dpre, Eigen::Index row, std::int64_t self_row,
                     const std::vector<std::int64_t>& child_rows, std::uint32_t begin,
                     std::uint32_t end) {
    dp_self.row(self_row) += dpre.block(row, 0, 1, d1);
    detail::spread_rows(dpre.row(row).data() + d1, d1, child_rows, begin, end,
                        [&](std::uint32_t k) { return dp_neigh.row(child_rows[k]).data(); });
  };
  for (Eigen::Index r = 0; r < R; ++r) {
    scatter(dh1_root, r, c.root_row[r], c.hop1_row, c.hop1_offsets[r], c.hop1_offsets[r + 1]);
  }
  for (Eigen::Index j = 0; j < H; ++j) {
    if (c.hop1_row[j] < 0) continue;
    scatter(dh1_hop, j, c.hop1_row[j], c.hop2_row, c.hop2_offsets[j], c.hop2_offsets[j + 1]);
  }

  grad.self1.noalias() = c.x.transpose() * dp_self;
  grad.neigh1.noalias() = c.x.transpose() * dp_neigh;
  return grad;
}

// Numerically stable -log(sigmoid(-x)) = log(1 + e^x).
template <typename S>
S softplus(S x) {
  return std::max(x, S(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <typename S>
S sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

// J = -log s(z_u . z_v) - sum_i log s(-z_u . z_neg_i) for a single pair.
double pair_loss(std::span<const float> z_u, std::span<const float> z_v,
                 const std::vector<std::span<const float>>& z_neg);

// Mean over B pairs of the negative-sampling objective. Rows of z are laid
// out as [u_0..u_{B-1}, v_0..v_{B-1}, neg_0..neg_{Q-1}]; the Q negatives are
// shared by every pair in the batch. Writes d(mean loss)/dz into dz when given.
template <typename S>
S batch_loss(const Mat<S>& z, std::size_t batch, std::size_t negatives, Mat<S>* dz) {
  const auto B = static_cast<Eigen::Index>(batch);
  const auto Q = static_cast<Eigen::Index>(negatives);
  if (z.rows() != 2 * B + Q) throw Error(ErrorCode::kShapeMismatch, "batch layout");
  if (!z.allFinite()) throw Error(ErrorCode::kNonFiniteInput, "embedding batch");
  if (dz != nullptr) *dz = Mat<S>::Zero(z.rows(), z.cols());

  const auto zu = z.topRows(B);
  const auto zv = z.middleRows(B, B);
  const auto zn = z.bottomRows(Q);
  const Mat<S> neg_scores = zu * zn.transpose();  // B x Q
  const S inv_b = S(1) / static_cast<S>(B);

  S total = 0;
  for (Eigen::Index i = 0; i < B; ++i) {
    const S s = zu.row(i).dot(zv.row(i));
    total += softplus(-s);
    for (Eigen::Index q = 0; q < Q; ++q) total += softplus(neg_scores(i, q));
    if (dz != nullptr) {
      const S gs = (sigmoid(s) - S(1)) * inv_b;
      dz->row(i) += gs * zv.row(i);
      dz->row(B + i) += gs * zu.row(i);
      for (Eigen::Index q = 0; q < Q; ++q) {
        const S gt = sigmoid(neg_scores(i, q)) * inv_b;
        dz->row(i) += gt * zn.row(q);
        dz->row(2 * B + q) += gt * zu.row(i);
      }
    }
  }
  return total * inv_b;
}

void save_checkpoint(const EncoderParams<float>& params, const EncoderConfig& cfg,
                     const std::filesystem::path& path);
std::pair<EncoderParams<float>, EncoderConfig> load_checkpoint(const std::filesystem::path& path);

}  // namespace mmg
