// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "rng/common/image.hpp"
#include "rng/geometry/camera.hpp"

namespace rng::evaluation {

struct PoseThresholds {
  double rotation_deg = 5.0;
  double translation_deg = 5.0;
  /// AUC integrates over integer thresholds 1..auc_max_deg.
  int auc_max_deg = 30;
};

struct PairError {
  double rotation_deg = 0.0;
  double translation_deg = 0.0;
};

/// Errors of every ordered pair (i, j), i != j, of relative camera motions.
/// The relative motion maps camera i into the frame of camera j.
std::vector<PairError> relative_pose_errors(std::span<const geometry::CameraPose> pred,
                                            std::span<const geometry::CameraPose> gt);

/// Percentages in [0, 100].
struct PoseMetrics {
  double ra = 0.0;
  double rt = 0.0;
  double auc = 0.0;
};

PoseMetrics pose_metrics(std::span<const PairError> errors, const PoseThresholds& thresholds = {});
PoseMetrics pose_metrics(std::span<const geometry::CameraPose> pred, std::span<const geometry::CameraPose> gt,
                         const PoseThresholds& thresholds = {});

/// Geodesic angle of a rotation, accurate near zero.
double geodesic_deg(const Eigen::Matrix3d& r);

struct DepthMetrics {
  double rel = 0.0;  // percent
  double a1 = 0.0;   // percent
};

DepthMetrics depth_metrics(const ImageF& pred, const ImageF& gt, const Mask& mask, double delta = 1.25);

struct ImageMetrics {
  double psnr = 0.0;
  double ssim = 0.0;
};

inline constexpr double kPsnrCap = 99.0;

double psnr(const ImageF& pred, const ImageF& gt);
/// Gaussian-window SSIM (11 x 11, sigma 1.5, K1 0.01, K2 0.03, data range 1)
/// over valid window positions, averaged over channels.
double ssim(const ImageF& pred, const ImageF& gt);
ImageMetrics image_metrics(const ImageF& pred, const ImageF& gt);

/// Normalized 1D Gaussian taps.
std::vector<double> gaussian_window(int size = 11, double sigma = 1.5);

}  // namespace rng::evaluation
