// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rng/nn/graph.hpp"

namespace rng::nn {

/// Multiply-accumulate work of matrix products (2 FLOPs per MAC) executed on
/// the calling thread. Element-wise work is not counted.
struct FlopCounter {
  static std::uint64_t get();
  static void reset();
  static void add(std::uint64_t flops);
};

/// Contiguous half-open row range.
struct RowRange {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
  bool operator==(const RowRange&) const = default;
};

/// Query rows [rows.begin, rows.end) may attend exactly to the listed key
/// ranges, in order.
struct QueryBlock {
  RowRange rows;
  std::vector<RowRange> keys;
};
using BlockMask = std::vector<QueryBlock>;

// Linear algebra. Weights are stored (in x out), so y = x W + b.
template <typename T> Var matmul(Graph<T>& g, Var a, Var b);
/// `segments` splits the rows into independently multiplied blocks so each
/// block's result does not depend on the other rows. Empty = one block.
template <typename T> Var linear(Graph<T>& g, Var x, Var w, Var b, std::span<const RowRange> segments = {});

template <typename T> Var add(Graph<T>& g, Var a, Var b);
/// x + row broadcast of r (1 x cols).
template <typename T> Var add_row(Graph<T>& g, Var x, Var r);
template <typename T> Var scale(Graph<T>& g, Var x, T s);

template <typename T> Var layernorm(Graph<T>& g, Var x, Var gamma, Var beta, T eps = T(1e-5));
/// tanh approximation.
template <typename T> Var gelu(Graph<T>& g, Var x);
template <typename T> Var sigmoid(Graph<T>& g, Var x);
/// exp(clamp(x, lo, hi)); the gradient is zero where the clamp is active.
template <typename T> Var exp_clamp(Graph<T>& g, Var x, T lo, T hi);

template <typename T> Var concat_rows(Graph<T>& g, const std::vector<Var>& parts);
template <typename T> Var slice_rows(Graph<T>& g, Var x, int begin, int end);
template <typename T> Var slice_cols(Graph<T>& g, Var x, int begin, int end);
template <typename T> Var concat_cols(Graph<T>& g, const std::vector<Var>& parts);

/// Multi-head scaled dot-product attention over packed heads. q is
/// (Nq x D), k and v are (Nk x D), D = heads * head_dim. Each query block
/// attends only to its key ranges; disallowed keys receive zero weight.
template <typename T> Var block_attention(Graph<T>& g, Var q, Var k, Var v, int heads, const BlockMask& mask);

// Image ops over channels-last feature maps stored as (batch*H*W x C).
/// 3x3 convolution with replicate padding; w is (9*Cin x Cout), rows ordered
/// (dy, dx, cin).
template <typename T> Var conv3x3(Graph<T>& g, Var x, Var w, Var b, int batch, int height, int width);
template <typename T> Var upsample2x(Graph<T>& g, Var x, int batch, int height, int width);
/// Token grid (batch*gh*gw x ps*ps*C) with per-token features ordered
/// (py, px, c) to a (batch*gh*ps*gw*ps x C) image.
template <typename T> Var unpatchify(Graph<T>& g, Var x, int batch, int grid_h, int grid_w, int patch, int channels);

/// Dense (rows x cols) patchify of a channels-last image, the inverse layout
/// of unpatchify. Not differentiable; used for inputs.
template <typename T>
Mat<T> patchify(std::span<const float> image, int height, int width, int channels, int patch);

}  // namespace rng::nn
