// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"

namespace rng::model {

/// Network shape. Defaults are the desk-scale configuration.
struct ModelConfig {
  int layers = 4;  // frame/global block pairs
  int dim = 128;
  int heads = 4;
  int patch = 8;
  int registers = 4;
  int resolution = 64;  // square input and output images
  int mlp_ratio = 4;
  int num_sources = 4;
  int camera_hidden = 128;
  /// Channels of the token-grid projection that starts each decode head.
  int head_width = 64;
  /// Output channels of the upsampling stages; one entry per 2x stage, so
  /// the count is log2(patch).
  std::vector<int> head_channels{32, 16, 16};
  std::uint64_t seed = 0;

  int grid() const { return resolution / patch; }
  int patches() const { return grid() * grid(); }
  int tokens_per_view() const { return 1 + registers + patches(); }
  int upsample_stages() const;

  /// Throws kInvalidArgument on an inconsistent configuration.
  void validate() const;

  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys are rejected.
  static ModelConfig from_json(const nlohmann::json& j);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace rng::model
