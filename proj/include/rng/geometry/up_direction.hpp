// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include <Eigen/Core>

#include "rng/geometry/camera.hpp"

namespace rng::geometry {

struct UpRecoveryOptions {
  /// A camera "looks at the origin" when its optical axis passes within
  /// `look_at_tolerance * |center|` of the origin.
  double look_at_tolerance = 1e-3;
  double search_min_deg = -90.0;
  double search_max_deg = 90.0;
  double grid_step_deg = 0.5;
  double refine_tolerance_deg = 0.05;
};

struct UpRecovery {
  double angle_deg = 0.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // rotation about world x
  std::size_t informative_cameras = 0;
  double residual = 0.0;  // sum of squared roll angles (deg^2) at the optimum
};

/// Roll of a camera, in degrees: the angle between its local up vector and
/// the plane spanned by `world_up` and its optical axis. Returns a negative
/// value when the roll is undefined (optical axis parallel to `world_up`).
double roll_angle_deg(const CameraPose& pose, const Eigen::Vector3d& world_up = Eigen::Vector3d::UnitY());

/// Finds the rotation about the world x axis that minimizes the summed
/// squared roll of all cameras with respect to +y: a 0.5 degree grid over
/// [-90, 90] refined by golden-section search. Cameras whose right axis is
/// parallel to the x axis have the same roll for every candidate rotation and
/// are left out of the objective.
///
/// Precondition: every input image shares the object's up direction; this
/// cannot be checked and is assumed.
UpRecovery recover_up_direction(std::span<const CameraPose> poses, const UpRecoveryOptions& options = {});

}  // namespace rng::geometry
