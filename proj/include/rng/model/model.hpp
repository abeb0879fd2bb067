// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "rng/attention/attention.hpp"
#include "rng/common/image.hpp"
#include "rng/geometry/camera.hpp"
#include "rng/model/weights.hpp"

namespace rng::model {

/// Decoded maps of one target view.
struct TargetMaps {
  ImageF rgb;         // H x W x 3 in [0, 1]
  ImageF pointmap;    // H x W x 3, normalized world frame
  ImageF confidence;  // H x W, strictly positive
};

struct ModelOutputs {
  std::vector<geometry::CameraPose> poses;  // one per source view
  std::vector<TargetMaps> targets;
};

/// Head outputs for `count` targets, stacked as (count*H*W x channels).
struct TargetVars {
  nn::Var rgb;
  nn::Var xyz;
  nn::Var confidence;
  int count = 0;
};

struct JointVars {
  attention::TokenLayout layout;
  nn::Var tokens;  // final-normalized trunk output, every row of the layout
  nn::Var camera;  // (num_sources x 9): 6D rotation then center
  TargetVars targets;
};

struct Stage1Vars {
  attention::SceneCache cache;
  nn::Var tokens;
  nn::Var camera;
};

struct JointOptions {
  /// Several targets in one forward, mutually isolated by the mask. Off by
  /// default so that a joint forward matches the single-target contract.
  bool multi_target = false;
};

struct Stage1Result {
  attention::SceneCache cache;
  std::vector<geometry::CameraPose> poses;
};

/// The reconstruction-and-generation network over weights of scalar type T.
/// Inference methods are const and may run concurrently.
template <typename T>
class RnG {
 public:
  explicit RnG(ModelWeights<T> weights);
  RnG(const RnG& other);
  RnG& operator=(const RnG& other);

  const ModelConfig& config() const { return weights_.config; }
  const ModelWeights<T>& weights() const { return weights_; }
  /// Write access to the weights; invalidates the cached fingerprint.
  ModelWeights<T>& mutable_weights();
  /// SHA-256 of the weights, recomputed lazily after mutation.
  std::string fingerprint() const;

  // Graph-level building blocks.
  nn::Var tokenize_sources(nn::Graph<T>& g, std::span<const ImageF> images) const;
  nn::Var embed_targets(nn::Graph<T>& g, std::span<const geometry::CameraPose> poses) const;
  JointVars forward_joint(nn::Graph<T>& g, std::span<const ImageF> sources,
                          std::span<const geometry::CameraPose> targets, const JointOptions& options = {}) const;
  Stage1Vars forward_stage1(nn::Graph<T>& g, std::span<const ImageF> sources) const;
  TargetVars forward_stage2(nn::Graph<T>& g, std::span<const geometry::CameraPose> targets,
                            const attention::SceneCache& cache) const;
  nn::Var camera_head(nn::Graph<T>& g, nn::Var camera_tokens) const;
  TargetVars decode_heads(nn::Graph<T>& g, nn::Var ray_tokens, int count) const;

  // Value-level entry points (no gradient recording).
  ModelOutputs run_joint(std::span<const ImageF> sources, std::span<const geometry::CameraPose> targets,
                         const JointOptions& options = {}) const;
  Stage1Result run_stage1(std::span<const ImageF> sources) const;
  std::vector<TargetMaps> run_stage2(std::span<const geometry::CameraPose> targets,
                                     const attention::SceneCache& cache) const;

  /// Camera-to-world poses from raw head rows; intrinsics are the known
  /// default intrinsics of the model resolution.
  std::vector<geometry::CameraPose> poses_from_head(const nn::Mat<T>& raw) const;
  std::vector<TargetMaps> maps_from(const nn::Graph<T>& g, const TargetVars& vars) const;

 private:
  nn::Var run_trunk(nn::Graph<T>& g, nn::Var x, const attention::TokenLayout& layout, bool multi_target,
                    attention::SceneCache* record, const attention::SceneCache* read) const;
  nn::Var add_positional(nn::Graph<T>& g, nn::Var patch_tokens, int views) const;
  nn::Var assemble(nn::Graph<T>& g, nn::Var patch_tokens, int views, bool first_is_special) const;
  nn::Var mlp_block(nn::Graph<T>& g, const BlockParams<T>& b, nn::Var x,
                    std::span<const nn::RowRange> segments) const;
  nn::Var gather_rows(nn::Graph<T>& g, nn::Var x, const std::vector<nn::RowRange>& ranges) const;
  void check_target(const geometry::CameraPose& pose) const;

  ModelWeights<T> weights_;
  nn::Mat<T> positional_;  // patches x dim
  mutable std::mutex fingerprint_mutex_;
  mutable std::string fingerprint_;
};

extern template class RnG<float>;
extern template class RnG<double>;

/// 2D sinusoidal encoding of a grid x grid token raster: the first half of
/// the channels encodes the row, the second half the column.
nn::Mat<double> positional_encoding(int grid, int dim);

enum class ForwardMode { kJoint, kStage1, kStage2 };

/// Matrix-product FLOPs (2 per multiply-accumulate) of one forward pass,
/// split by stage. Matches nn::FlopCounter exactly.
struct FlopBreakdown {
  std::uint64_t embed = 0;
  std::uint64_t trunk_linear = 0;
  std::uint64_t trunk_attention = 0;
  std::uint64_t camera_head = 0;
  std::uint64_t decode = 0;

  std::uint64_t total() const { return embed + trunk_linear + trunk_attention + camera_head + decode; }
};

/// Joint: `num_sources` sources plus `num_targets` targets in one forward.
/// Stage 1: sources only. Stage 2: `num_targets` targets against a cache of
/// `num_sources` views.
FlopBreakdown analytic_flops(const ModelConfig& config, ForwardMode mode, int num_sources, int num_targets);

}  // namespace rng::model
