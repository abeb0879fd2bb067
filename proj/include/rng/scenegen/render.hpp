// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "rng/common/image.hpp"
#include "rng/geometry/camera.hpp"
#include "rng/scenegen/scene.hpp"

namespace rng::scenegen {

struct RenderedView {
  geometry::CameraPose pose;
  ImageF rgb;       // H x W x 3 in [0, 1]
  ImageF depth;     // H x W camera-z, 0 = background
  ImageF pointmap;  // H x W x 3 world, zero on background
  Mask mask;        // H x W, 1 = foreground
};

struct RenderOptions {
  /// Rotated-grid 2x2 supersampling of the color channels. Depth and point
  /// maps always come from the single pixel-center ray.
  bool antialias = false;
};

/// Lambertian shading with a warm key light, a cool fill light and ambient
/// term over a white background.
RenderedView render_rgbd(const ProceduralScene& scene, const geometry::CameraPose& pose,
                         const RenderOptions& options = {});

/// Shaded color of the first hit along a ray (white when it misses).
Eigen::Vector3d shade(const ProceduralScene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

}  // namespace rng::scenegen
