// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/geometry/camera.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "rng/common/error.hpp"

namespace rng::geometry {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void require_intrinsics(const CameraPose& pose) {
  const auto& k = pose.intrinsics;
  require(k.fx > 0.0 && k.fy > 0.0, ErrorCode::kInvalidCamera,
          "degenerate intrinsics: fx and fy must be positive");
  require(pose.width > 0 && pose.height > 0, ErrorCode::kInvalidCamera,
          "camera image size must be positive");
}

}  // namespace

Intrinsics default_intrinsics(int width, int height) {
  return Intrinsics{0.75 * width, 0.75 * width, 0.5 * width, 0.5 * height};
}

void validate(const CameraPose& pose, double tolerance) {
  require_intrinsics(pose);
  const auto& k = pose.intrinsics;
  require(k.cx > 0.0 && k.cx < pose.width && k.cy > 0.0 && k.cy < pose.height,
          ErrorCode::kInvalidCamera, "principal point outside the image");
  require(pose.rotation.allFinite() && pose.center.allFinite(), ErrorCode::kInvalidCamera,
          "non-finite camera pose");
  const double ortho =
      (pose.rotation.transpose() * pose.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  require(ortho <= tolerance, ErrorCode::kInvalidCamera,
          "rotation is not orthonormal (max |R^T R - I| = " + std::to_string(ortho) + ")");
  require(std::abs(pose.rotation.determinant() - 1.0) <= tolerance, ErrorCode::kInvalidCamera,
          "rotation determinant is not +1");
}

bool is_valid(const CameraPose& pose, double tolerance) {
  try {
    validate(pose, tolerance);
    return true;
  } catch (const Error&) {
    return false;
  }
}

CameraPose canonical_pose(const Intrinsics& intrinsics, int width, int height) {
  CameraPose pose;
  pose.rotation = Eigen::Matrix3d::Identity();
  pose.center = Eigen::Vector3d(0.0, 0.0, -1.0);
  pose.intrinsics = intrinsics;
  pose.width = width;
  pose.height = height;
  return pose;
}

bool is_canonical(const CameraPose& pose) {
  return pose.rotation == Eigen::Matrix3d::Identity() &&
         pose.center == Eigen::Vector3d(0.0, 0.0, -1.0);
}

Eigen::Vector3d pixel_direction(const CameraPose& pose, double x, double y) {
  const auto& k = pose.intrinsics;
  const Eigen::Vector3d local((x - k.cx) / k.fx, (y - k.cy) / k.fy, 1.0);
  return pose.rotation * local;
}

Projection project(const CameraPose& pose, const Eigen::Vector3d& world) {
  const Eigen::Vector3d local = pose.rotation.transpose() * (world - pose.center);
  const auto& k = pose.intrinsics;
  Projection p;
  p.depth = local.z();
  p.pixel = Eigen::Vector2d(k.fx * local.x() / local.z() + k.cx, k.fy * local.y() / local.z() + k.cy);
  return p;
}

double camera_depth(const CameraPose& pose, const Eigen::Vector3d& world) {
  return pose.rotation.col(2).dot(world - pose.center);
}

Eigen::Matrix3d rotation_from_6d(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  constexpr double kEps = 1e-12;
  Eigen::Vector3d b1 = a;
  if (b1.norm() < kEps || !b1.allFinite()) b1 = Eigen::Vector3d::UnitX();
  b1.normalize();
  Eigen::Vector3d b2 = b - b1.dot(b) * b1;
  if (b2.norm() < kEps * std::max(1.0, b.norm()) || !b2.allFinite()) {
    // Collinear input: complete with the world axis least aligned with b1.
    Eigen::Index axis = 0;
    b1.cwiseAbs().minCoeff(&axis);
    const Eigen::Vector3d helper = Eigen::Vector3d::Unit(axis);
    b2 = helper - b1.dot(helper) * b1;
  }
  b2.normalize();
  Eigen::Matrix3d r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b1.cross(b2);
  return r;
}

double rotation_angle_deg(const Eigen::Matrix3d& r) {
  const double c = std::clamp((r.trace() - 1.0) * 0.5, -1.0, 1.0);
  return std::acos(c) * kRadToDeg;
}

double angle_between_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  // atan2 form stays accurate for nearly parallel vectors.
  return std::atan2(a.cross(b).norm(), a.dot(b)) * kRadToDeg;
}

Eigen::Matrix3d rotate_x(double degrees) {
  return Eigen::AngleAxisd(degrees / kRadToDeg, Eigen::Vector3d::UnitX()).toRotationMatrix();
}

PluckerMap plucker_map(const CameraPose& pose) {
  require_intrinsics(pose);
  PluckerMap map;
  map.directions = ImageD(pose.height, pose.width, 3);
  map.moments = ImageD(pose.height, pose.width, 3);
  for (int v = 0; v < pose.height; ++v) {
    for (int u = 0; u < pose.width; ++u) {
      const Eigen::Vector3d d = pixel_direction(pose, u + 0.5, v + 0.5).normalized();
      const Eigen::Vector3d m = pose.center.cross(d);
      for (int c = 0; c < 3; ++c) {
        map.directions.at(v, u, c) = d[c];
        map.moments.at(v, u, c) = m[c];
      }
    }
  }
  return map;
}

CameraPose Similarity::apply(const CameraPose& pose) const {
  CameraPose out = pose;
  out.rotation = rotation * pose.rotation;
  out.center = apply(pose.center);
  return out;
}

bool Similarity::is_identity() const {
  return rotation == Eigen::Matrix3d::Identity() && translation == Eigen::Vector3d::Zero() &&
         scale == 1.0;
}

NormalizedCameras normalize_cameras(std::span<const CameraPose> poses) {
  require(!poses.empty(), ErrorCode::kEmptyInput, "normalize_cameras needs at least one pose");
  const CameraPose& first = poses.front();
  NormalizedCameras out;
  if (is_canonical(first)) {
    out.poses.assign(poses.begin(), poses.end());
    return out;
  }
  const double distance = first.center.norm();
  require(distance > 1e-12, ErrorCode::kDegenerateScale,
          "first camera sits at the world origin; scale is undefined");

  Similarity& sim = out.similarity;
  sim.rotation = first.rotation.transpose();
  sim.scale = 1.0 / distance;
  sim.translation = Eigen::Vector3d(0.0, 0.0, -1.0) - sim.scale * (sim.rotation * first.center);

  out.poses.reserve(poses.size());
  for (const auto& p : poses) out.poses.push_back(sim.apply(p));
  const CameraPose canonical = canonical_pose(first.intrinsics, first.width, first.height);
  out.poses.front().rotation = canonical.rotation;
  out.poses.front().center = canonical.center;
  return out;
}

std::vector<CameraPose> rotate_poses(std::span<const CameraPose> poses, const Eigen::Matrix3d& r) {
  std::vector<CameraPose> out;
  out.reserve(poses.size());
  for (const auto& p : poses) {
    CameraPose q = p;
    q.rotation = r * p.rotation;
    q.center = r * p.center;
    out.push_back(q);
  }
  return out;
}

ImageF depth_to_pointmap(const ImageF& depth, const CameraPose& pose) {
  require(depth.channels == 1 && depth.height == pose.height && depth.width == pose.width,
          ErrorCode::kShapeMismatch, "depth map does not match the camera size");
  require_intrinsics(pose);
  ImageF out(depth.height, depth.width, 3, 0.0f);
  for (int v = 0; v < depth.height; ++v) {
    for (int u = 0; u < depth.width; ++u) {
      const double z = depth.at(v, u);
      if (!(z > 0.0)) continue;
      const Eigen::Vector3d p = pose.center + z * pixel_direction(pose, u + 0.5, v + 0.5);
      for (int c = 0; c < 3; ++c) out.at(v, u, c) = static_cast<float>(p[c]);
    }
  }
  return out;
}

Mask foreground_mask(const ImageF& depth) {
  Mask mask(depth.height, depth.width, 1, 0);
  for (std::size_t i = 0; i < depth.data.size(); ++i) mask.data[i] = depth.data[i] > 0.0f ? 1 : 0;
  return mask;
}

ImageF pointmap_to_depth(const ImageF& pointmap, const CameraPose& pose) {
  require(pointmap.channels == 3, ErrorCode::kShapeMismatch, "point map must have 3 channels");
  ImageF out(pointmap.height, pointmap.width, 1, 0.0f);
  const Eigen::Vector3d axis = pose.rotation.col(2);
  for (int v = 0; v < pointmap.height; ++v) {
    for (int u = 0; u < pointmap.width; ++u) {
      const Eigen::Vector3d p(pointmap.at(v, u, 0), pointmap.at(v, u, 1), pointmap.at(v, u, 2));
      out.at(v, u) = static_cast<float>(axis.dot(p - pose.center));
    }
  }
  return out;
}

CameraPose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target,
                   const Intrinsics& intrinsics, int width, int height,
                   const Eigen::Vector3d& world_up, const Eigen::Vector3d& fallback_up) {
  const Eigen::Vector3d forward = (target - center).normalized();
  Eigen::Vector3d up = world_up.normalized();
  if (std::abs(forward.dot(up)) > 1.0 - 1e-9) up = fallback_up.normalized();
  // Local up (-y) is the component of `up` orthogonal to the viewing direction.
  const Eigen::Vector3d down = -(up - up.dot(forward) * forward).normalized();
  CameraPose pose;
  pose.rotation.col(0) = down.cross(forward);
  pose.rotation.col(1) = down;
  pose.rotation.col(2) = forward;
  pose.center = center;
  pose.intrinsics = intrinsics;
  pose.width = width;
  pose.height = height;
  return pose;
}

}  // namespace rng::geometry
