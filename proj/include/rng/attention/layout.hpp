// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "rng/nn/ops.hpp"

namespace rng::attention {

enum class ViewRole { kSource, kTarget };

struct ViewSpan {
  ViewRole role = ViewRole::kSource;
  nn::RowRange tokens;
  bool special = false;  // first source view: carries its own camera/register embeddings
};

/// Which token rows belong to which view. Every view has 1 camera token,
/// `registers` register tokens and `patches` patch (source) or ray (target)
/// tokens, in that order.
class TokenLayout {
 public:
  TokenLayout() = default;
  TokenLayout(int num_sources, int num_targets, int registers, int patches);

  static TokenLayout sources_only(int num_sources, int registers, int patches) {
    return TokenLayout(num_sources, 0, registers, patches);
  }

  const std::vector<ViewSpan>& views() const { return views_; }
  int tokens_per_view() const { return 1 + registers_ + patches_; }
  int registers() const { return registers_; }
  int patches() const { return patches_; }
  int num_sources() const { return num_sources_; }
  int num_targets() const { return num_targets_; }
  int total_tokens() const { return static_cast<int>(views_.size()) * tokens_per_view(); }
  int source_tokens() const { return num_sources_ * tokens_per_view(); }

  const ViewSpan& view(int i) const { return views_.at(static_cast<std::size_t>(i)); }
  int view_of(int token) const;
  /// Row of the camera token of view i.
  int camera_row(int i) const { return view(i).tokens.begin; }
  /// Rows of the patch/ray tokens of view i.
  nn::RowRange patch_rows(int i) const {
    return {view(i).tokens.begin + 1 + registers_, view(i).tokens.end};
  }

  /// Row blocks used for segmented projections: all sources, then each
  /// target on its own.
  std::vector<nn::RowRange> row_segments() const;

  /// Throws kStructural when ranges overlap or leave gaps, when the first
  /// view is not the special source, or when more than one target is present
  /// without `allow_multi_target`.
  void validate(bool allow_multi_target = false) const;

 private:
  std::vector<ViewSpan> views_;
  int registers_ = 0;
  int patches_ = 0;
  int num_sources_ = 0;
  int num_targets_ = 0;
};

/// allowed(i, j) is false iff view(i) is a source and view(j) a target, or
/// i and j are in distinct target views.
bool allowed(const TokenLayout& layout, int query, int key);

/// Each view attends only to its own tokens.
nn::BlockMask frame_mask(const TokenLayout& layout);

/// Sources attend to all sources; each target attends to all sources and to
/// itself.
nn::BlockMask global_mask(const TokenLayout& layout, bool allow_multi_target = false);

}  // namespace rng::attention
