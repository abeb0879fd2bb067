// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "rng/evaluation/metrics.hpp"
#include "rng/geometry/pointcloud.hpp"
#include "rng/model/model.hpp"
#include "rng/scenegen/dataset.hpp"

namespace rng::evaluation {

struct ScanOptions {
  /// Fraction of each view's foreground pixels dropped, lowest confidence
  /// first. 1.0 drops everything.
  double conf_quantile = 0.2;
  /// A predicted pixel is background when every channel is within this
  /// distance of the white backdrop.
  double background_tolerance = 0.1;
};

Mask predicted_foreground(const ImageF& rgb, double tolerance);

/// Foreground points of one rendered view that survive the confidence
/// quantile, in pixel order. Colors and confidences are carried along.
geometry::PointCloud filter_points(const model::TargetMaps& maps, const ScanOptions& options);

/// Stage-2 queries at every pose, filtered and merged. Throws kEmptyInput
/// when nothing survives the threshold.
geometry::PointCloud scan(const model::RnG<float>& model, const attention::SceneCache& cache,
                          std::span<const geometry::CameraPose> poses, const ScanOptions& options);

/// Look-at cameras on a Fibonacci sphere around the origin of the normalized
/// frame, where up is -y.
std::vector<geometry::CameraPose> sphere_poses(int count, double radius, int resolution);

/// x = R^T (x' - t) / s.
geometry::PointCloud untransform(const geometry::PointCloud& cloud, const geometry::Similarity& sim);

struct ScanResult {
  geometry::PointCloud cloud;  // world frame of the scene
  double chamfer = 0.0;
};

/// Runs stage 1 on the four source views, queries `query_poses` (normalized
/// frame), maps the merged cloud back through the source normalization and
/// compares it against a dense sampling of the analytic surface.
ScanResult scan_and_chamfer(const model::RnG<float>& model, const scenegen::ProceduralScene& scene,
                            std::span<const scenegen::RenderedView> sources,
                            std::span<const geometry::CameraPose> query_poses, const ScanOptions& options,
                            std::size_t surface_samples = 20000);

struct EvalConfig {
  int scenes = 50;
  std::uint64_t seed = 0;
  int views_per_scene = 25;
  int targets = 10;
  PoseThresholds pose;
  /// Second pose-threshold set reported alongside the primary one.
  PoseThresholds relaxed_pose{15.0, 15.0, 30};
  double depth_delta = 1.25;
  ScanOptions scan;
  std::size_t surface_samples = 20000;

  void validate() const;
};

/// Scene seeds used by evaluation; disjoint from the training range.
std::uint64_t held_out_scene_seed(std::uint64_t seed, int index);

struct FirstViewError {
  double rotation_deg_mean = 0.0;
  double rotation_deg_max = 0.0;
  double center_mean = 0.0;
  double center_max = 0.0;
};

struct EvalReport {
  int scenes = 0;
  PoseMetrics pose;
  PoseMetrics pose_relaxed;
  PoseThresholds relaxed_thresholds;
  DepthMetrics source_depth;
  DepthMetrics novel_depth;
  ImageMetrics nvs;
  /// Every target predicted as the mean color of the source images.
  ImageMetrics mean_color_baseline;
  /// Mean over scenes whose filtered target cloud is non-empty; NaN when none is.
  double cd = 0.0;
  int cd_scenes = 0;
  FirstViewError first_view;

  nlohmann::json to_json() const;
  /// Header plus one row, columns in the usual results-table order.
  std::string to_csv() const;
};

EvalReport evaluate(const model::RnG<float>& model, const EvalConfig& config);

/// Views of one held-out evaluation scene.
struct EvalScene {
  scenegen::ProceduralScene scene;
  std::vector<scenegen::RenderedView> sources;  // normalized, first canonical
  std::vector<scenegen::RenderedView> targets;  // normalized
  geometry::Similarity similarity;
};

EvalScene make_eval_scene(std::uint64_t scene_seed, int resolution, const EvalConfig& config);

ImageF mean_color_image(std::span<const scenegen::RenderedView> sources);

struct BenchReport {
  int sources = 0;
  int queries = 0;
  std::uint64_t joint_flops = 0;
  std::uint64_t stage1_flops = 0;
  std::uint64_t stage2_flops = 0;  // per query
  double flop_ratio = 0.0;
  /// Same ratio for large_scale_config(), next to a measured reference of
  /// 2.29 vs 12.26 TFLOPs at that scale.
  double large_scale_flop_ratio = 0.0;
  double reference_ratio = 2.29 / 12.26;
  double joint_ms = 0.0;   // median
  double stage1_ms = 0.0;  // median
  double stage2_ms = 0.0;  // median
  std::size_t joint_peak_bytes = 0;
  std::size_t stage2_peak_bytes = 0;  // activations plus cache
  std::size_t cache_bytes = 0;
  std::size_t weight_bytes = 0;

  nlohmann::json to_json() const;
};

/// 24 layers, width 1024, 16 heads, patch 16, 512 px.
model::ModelConfig large_scale_config();

BenchReport efficiency_bench(const model::RnG<float>& model, int num_sources = 4, int num_queries = 10,
                             std::uint64_t scene_seed = 1234567);

}  // namespace rng::evaluation
