// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "rng/attention/layout.hpp"
#include "rng/geometry/camera.hpp"
#include "rng/interface/rngt.hpp"
#include "rng/nn/graph.hpp"
#include "rng/nn/ops.hpp"

namespace rng::attention {

template <typename T>
struct AttentionParams {
  nn::Param<T> qkv_w;  // D x 3D, columns [q | k | v]
  nn::Param<T> qkv_b;  // 1 x 3D
  nn::Param<T> out_w;  // D x D
  nn::Param<T> out_b;  // 1 x D
};

struct AttentionOutput {
  nn::Var out;  // after the output projection
  nn::Var k;    // projected keys, all heads packed
  nn::Var v;
};

/// Projection -> block-masked multi-head attention -> output projection.
template <typename T>
AttentionOutput multi_head_attention(nn::Graph<T>& g, nn::Var x, const AttentionParams<T>& p, int heads,
                                     const nn::BlockMask& mask, std::span<const nn::RowRange> segments = {});

/// Global attention under the reconstruction-guided mask.
template <typename T>
AttentionOutput masked_global_attention(nn::Graph<T>& g, nn::Var x, const AttentionParams<T>& p, int heads,
                                        const TokenLayout& layout, bool allow_multi_target = false);

/// Self-attention restricted to each view's own tokens.
template <typename T>
nn::Var frame_attention(nn::Graph<T>& g, nn::Var x, const AttentionParams<T>& p, int heads, const TokenLayout& layout);

/// Source-view keys and values of every global-attention block, produced by
/// a source-only forward. Immutable once sealed.
class SceneCache {
 public:
  struct Block {
    nn::Mat<float> k;
    nn::Mat<float> v;
  };

  SceneCache() = default;
  SceneCache(TokenLayout source_layout, std::string model_fingerprint);

  void add_block(nn::Mat<float> k, nn::Mat<float> v);
  void set_poses(std::vector<geometry::CameraPose> poses);
  /// Freezes the cache; throws kStructural unless it has `expected_blocks`
  /// blocks of consistent size.
  void seal(int expected_blocks);

  bool sealed() const { return sealed_; }
  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  int tokens() const { return layout_.source_tokens(); }
  const Block& block(int i) const;
  const TokenLayout& layout() const { return layout_; }
  const std::vector<geometry::CameraPose>& poses() const { return poses_; }
  const std::string& model_fingerprint() const { return fingerprint_; }

  /// Throws kUnsealedCache or kStaleCache unless the cache is sealed and was
  /// built by the model with `fingerprint`.
  void check_usable(const std::string& fingerprint) const;

  /// SHA-256 over the cached tensors, layout, poses and model fingerprint.
  std::string content_hash() const;

  io::RngtContainer to_container() const;
  static SceneCache from_container(const io::RngtContainer& c);

 private:
  void require_mutable() const;

  TokenLayout layout_;
  std::string fingerprint_;
  std::vector<Block> blocks_;
  std::vector<geometry::CameraPose> poses_;
  bool sealed_ = false;
};

/// Stage-2 global attention: target queries attend to the cached source keys
/// of `block` followed by the targets' own keys. `targets` is a target-only
/// layout; several targets are mutually isolated.
template <typename T>
nn::Var query_with_cache(nn::Graph<T>& g, nn::Var target_x, const AttentionParams<T>& p, int heads,
                         const SceneCache& cache, int block, const TokenLayout& targets);

}  // namespace rng::attention
