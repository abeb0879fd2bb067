// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/attention/layout.hpp"

#include "rng/common/error.hpp"

namespace rng::attention {

TokenLayout::TokenLayout(int num_sources, int num_targets, int registers, int patches)
    : registers_(registers), patches_(patches), num_sources_(num_sources), num_targets_(num_targets) {
  require(num_sources >= 0 && num_targets >= 0 && registers >= 0 && patches > 0, ErrorCode::kInvalidArgument,
          "invalid token layout counts");
  const int per_view = tokens_per_view();
  int at = 0;
  for (int s = 0; s < num_sources; ++s, at += per_view) {
    views_.push_back(ViewSpan{ViewRole::kSource, {at, at + per_view}, s == 0});
  }
  for (int t = 0; t < num_targets; ++t, at += per_view) {
    views_.push_back(ViewSpan{ViewRole::kTarget, {at, at + per_view}, false});
  }
}

int TokenLayout::view_of(int token) const {
  for (std::size_t i = 0; i < views_.size(); ++i) {
    if (token >= views_[i].tokens.begin && token < views_[i].tokens.end) return static_cast<int>(i);
  }
  fail(ErrorCode::kShapeMismatch, "token index outside the layout");
}

std::vector<nn::RowRange> TokenLayout::row_segments() const {
  std::vector<nn::RowRange> segments;
  if (num_sources_ > 0) segments.push_back({0, source_tokens()});
  for (const auto& v : views_) {
    if (v.role == ViewRole::kTarget) segments.push_back(v.tokens);
  }
  return segments;
}

void TokenLayout::validate(bool allow_multi_target) const {
  int at = 0;
  int targets = 0;
  bool seen_target = false;
  for (std::size_t i = 0; i < views_.size(); ++i) {
    const auto& v = views_[i];
    require(v.tokens.begin == at && v.tokens.size() == tokens_per_view(), ErrorCode::kStructural,
            "token layout ranges must be contiguous and disjoint");
    at = v.tokens.end;
    if (v.role == ViewRole::kTarget) {
      ++targets;
      seen_target = true;
    } else {
      require(!seen_target, ErrorCode::kStructural, "source views must precede target views");
    }
    require(v.special == (i == 0 && v.role == ViewRole::kSource), ErrorCode::kStructural,
            "only the first source view is special");
  }
  require(targets <= 1 || allow_multi_target, ErrorCode::kStructural,
          "joint forward supports one target view unless multi-target mode is enabled");
}

bool allowed(const TokenLayout& layout, int query, int key) {
  const int qi = layout.view_of(query);
  const int ki = layout.view_of(key);
  const bool q_source = layout.view(qi).role == ViewRole::kSource;
  const bool k_target = layout.view(ki).role == ViewRole::kTarget;
  if (q_source && k_target) return false;
  if (!q_source && k_target && qi != ki) return false;
  return true;
}

nn::BlockMask frame_mask(const TokenLayout& layout) {
  nn::BlockMask mask;
  for (const auto& v : layout.views()) mask.push_back({v.tokens, {v.tokens}});
  return mask;
}

nn::BlockMask global_mask(const TokenLayout& layout, bool allow_multi_target) {
  layout.validate(allow_multi_target);
  const nn::RowRange sources{0, layout.source_tokens()};
  nn::BlockMask mask;
  if (sources.size() > 0) mask.push_back({sources, {sources}});
  for (const auto& v : layout.views()) {
    if (v.role != ViewRole::kTarget) continue;
    if (sources.size() > 0) {
      mask.push_back({v.tokens, {sources, v.tokens}});
    } else {
      mask.push_back({v.tokens, {v.tokens}});
    }
  }
  return mask;
}

}  // namespace rng::attention
