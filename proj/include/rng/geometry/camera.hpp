// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "rng/common/image.hpp"

namespace rng::geometry {

struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  bool operator==(const Intrinsics&) const = default;
};

/// Pinhole intrinsics used throughout the desk-scale pipeline: focal length
/// 0.75 * width (about 67 degrees horizontal field of view), principal point
/// at the image center.
Intrinsics default_intrinsics(int width, int height);

/// Camera-to-world rigid pose. The camera looks along its local +z axis,
/// local +x points right and local +y points down in the image.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Intrinsics intrinsics;
  int width = 0;
  int height = 0;

  Eigen::Vector3d right() const { return rotation.col(0); }
  Eigen::Vector3d up() const { return -rotation.col(1); }
  Eigen::Vector3d optical_axis() const { return rotation.col(2); }

  bool operator==(const CameraPose& o) const {
    return rotation == o.rotation && center == o.center && intrinsics == o.intrinsics &&
           width == o.width && height == o.height;
  }
};

/// Throws ErrorCode::kInvalidCamera when the rotation is not a proper
/// rotation (within `tolerance`) or the intrinsics are degenerate.
void validate(const CameraPose& pose, double tolerance = 1e-6);
bool is_valid(const CameraPose& pose, double tolerance = 1e-6);

/// The fixed pose the first source view is normalized to: [I | (0,0,-1)].
CameraPose canonical_pose(const Intrinsics& intrinsics, int width, int height);
bool is_canonical(const CameraPose& pose);

/// Un-normalized world-space direction R * K^-1 * (x, y, 1) for continuous
/// image coordinates (x, y). Pixel (u, v) has its center at (u + 0.5, v + 0.5).
Eigen::Vector3d pixel_direction(const CameraPose& pose, double x, double y);

/// Continuous image coordinates of a world point, plus its camera-space depth.
struct Projection {
  Eigen::Vector2d pixel;
  double depth = 0.0;
};
Projection project(const CameraPose& pose, const Eigen::Vector3d& world);

/// Camera-space z of a world point.
double camera_depth(const CameraPose& pose, const Eigen::Vector3d& world);

/// Rotation that maps the 6D representation (first two columns) to a proper
/// rotation by Gram-Schmidt. Collinear or zero inputs fall back to the nearest
/// valid frame by cross-product completion.
Eigen::Matrix3d rotation_from_6d(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

/// Geodesic angle of a rotation matrix, in degrees.
double rotation_angle_deg(const Eigen::Matrix3d& r);

/// Angle in degrees between two non-zero vectors.
double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

Eigen::Matrix3d rotate_x(double degrees);

/// Per-pixel Plücker coordinates: unit direction d and moment m = center x d.
struct PluckerMap {
  ImageD directions;
  ImageD moments;
};

PluckerMap plucker_map(const CameraPose& pose);

/// x' = scale * rotation * x + translation.
struct Similarity {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
  double scale = 1.0;

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return scale * (rotation * p) + translation;
  }
  CameraPose apply(const CameraPose& pose) const;
  bool is_identity() const;
};

struct NormalizedCameras {
  std::vector<CameraPose> poses;
  Similarity similarity;
};

/// Maps the first pose to [I | (0,0,-1)] exactly and every other pose through
/// the same similarity. The scale puts the first camera at unit distance from
/// the world origin.
NormalizedCameras normalize_cameras(std::span<const CameraPose> poses);

/// Apply a rotation about the world origin to every pose.
std::vector<CameraPose> rotate_poses(std::span<const CameraPose> poses, const Eigen::Matrix3d& r);

/// World points from camera-space z-depth. Background (depth 0) maps to the
/// zero vector.
ImageF depth_to_pointmap(const ImageF& depth, const CameraPose& pose);
Mask foreground_mask(const ImageF& depth);

/// Camera-space z of each pixel of a world point map.
ImageF pointmap_to_depth(const ImageF& pointmap, const CameraPose& pose);

/// Look-at pose with roll-free orientation with respect to `world_up`. Falls
/// back to `fallback_up` when the viewing direction is parallel to `world_up`.
CameraPose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                   const Intrinsics& intrinsics, int width, int height,
                   const Eigen::Vector3d& world_up = Eigen::Vector3d::UnitY(),
                   const Eigen::Vector3d& fallback_up = Eigen::Vector3d::UnitX());

}  // namespace rng::geometry
