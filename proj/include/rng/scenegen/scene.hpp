// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace rng::scenegen {

enum class PrimitiveKind : std::uint8_t { kSphere = 0, kBox = 1, kCylinder = 2 };

std::string_view to_string(PrimitiveKind kind);

/// Analytic primitive. `size` is the radius (x) for spheres, the half
/// extents for axis-aligned boxes, and (radius, half height, -) for
/// y-aligned capped cylinders.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::kSphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Zero();
  Eigen::Vector3d albedo = Eigen::Vector3d::Constant(0.5);

  double bounding_radius() const;
  bool contains(const Eigen::Vector3d& p, double eps = 0.0) const;

  bool operator==(const Primitive&) const = default;
};

/// 1-6 primitives that fit inside the unit ball at the origin.
struct ProceduralScene {
  std::vector<Primitive> primitives;
  std::uint64_t seed = 0;

  bool operator==(const ProceduralScene&) const = default;
};

ProceduralScene make_scene(std::uint64_t seed);

struct Hit {
  double t = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int primitive = -1;
};

/// Nearest intersection with t > 0 along a unit-direction ray.
std::optional<Hit> intersect(const Primitive& prim, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);
std::optional<Hit> intersect(const ProceduralScene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir);

/// Area-weighted random samples on the scene's outer surface: points of one
/// primitive that lie inside another primitive are discarded.
std::vector<Eigen::Vector3d> sample_surface(const ProceduralScene& scene, std::size_t count, std::uint64_t seed);

}  // namespace rng::scenegen
