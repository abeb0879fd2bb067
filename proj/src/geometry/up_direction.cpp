// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/geometry/up_direction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "rng/common/error.hpp"

namespace rng::geometry {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

bool looks_at_origin(const CameraPose& pose, double tolerance) {
  const Eigen::Vector3d axis = pose.optical_axis();
  const Eigen::Vector3d to_origin = -pose.center;
  if (to_origin.norm() < 1e-12) return false;
  if (axis.dot(to_origin) <= 0.0) return false;
  const Eigen::Vector3d off_axis = to_origin - axis.dot(to_origin) * axis;
  return off_axis.norm() <= tolerance * to_origin.norm();
}

}  // namespace

double roll_angle_deg(const CameraPose& pose, const Eigen::Vector3d& world_up) {
  const Eigen::Vector3d axis = pose.optical_axis();
  const Eigen::Vector3d normal = world_up.normalized().cross(axis);
  const double n = normal.norm();
  if (n < 1e-9) return -1.0;
  const double s = std::min(1.0, std::abs(normal.dot(pose.up())) / n);
  return std::asin(s) * kRadToDeg;
}

UpRecovery recover_up_direction(std::span<const CameraPose> poses, const UpRecoveryOptions& options) {
  require(poses.size() >= 2, ErrorCode::kInvalidArgument, "up-direction recovery needs at least two poses");
  for (const auto& p : poses) {
    require(looks_at_origin(p, options.look_at_tolerance), ErrorCode::kNotApplicable,
            "up-direction recovery requires every camera to look at the world origin");
  }

  std::vector<CameraPose> informative;
  for (const auto& p : poses) {
    const Eigen::Vector3d r = p.right();
    if (std::hypot(r.y(), r.z()) > 1e-6) informative.push_back(p);
  }
  require(!informative.empty(), ErrorCode::kNotApplicable,
          "no camera constrains the rotation about the x axis (all right axes parallel to x)");

  const auto objective = [&](double deg) {
    const Eigen::Matrix3d rx = rotate_x(deg);
    double sum = 0.0;
    for (const auto& p : informative) {
      CameraPose q = p;
      q.rotation = rx * p.rotation;
      const double roll = roll_angle_deg(q);
      if (roll >= 0.0) sum += roll * roll;
    }
    return sum;
  };

  double best_deg = options.search_min_deg;
  double best_val = std::numeric_limits<double>::infinity();
  const int steps = static_cast<int>(std::round((options.search_max_deg - options.search_min_deg) / options.grid_step_deg));
  for (int i = 0; i <= steps; ++i) {
    const double deg = options.search_min_deg + i * options.grid_step_deg;
    const double val = objective(deg);
    if (val < best_val) {
      best_val = val;
      best_deg = deg;
    }
  }

  // Golden-section refinement around the best grid cell.
  double lo = std::max(options.search_min_deg, best_deg - options.grid_step_deg);
  double hi = std::min(options.search_max_deg, best_deg + options.grid_step_deg);
  const double inv_phi = (std::sqrt(5.0) - 1.0) * 0.5;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = objective(x1);
  double f2 = objective(x2);
  while (hi - lo > options.refine_tolerance_deg) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = objective(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = objective(x2);
    }
  }
  double refined = 0.5 * (lo + hi);
  double refined_val = objective(refined);
  if (best_val < refined_val) {
    refined = best_deg;
    refined_val = best_val;
  }

  UpRecovery out;
  out.angle_deg = refined;
  out.rotation = rotate_x(refined);
  out.informative_cameras = informative.size();
  out.residual = refined_val;
  return out;
}

}  // namespace rng::geometry
