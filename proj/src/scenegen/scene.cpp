// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/scenegen/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace rng::scenegen {

namespace {

constexpr double kHitEpsilon = 1e-9;

void keep_nearest(std::optional<Hit>& best, double t, const Eigen::Vector3d& normal) {
  if (t > kHitEpsilon && (!best || t < best->t)) best = Hit{t, normal, -1};
}

std::optional<Hit> intersect_sphere(const Primitive& s, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d oc = o - s.center;
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - s.size.x() * s.size.x();
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  std::optional<Hit> best;
  for (double t : {-b - root, -b + root}) {
    if (t > kHitEpsilon) {
      const Eigen::Vector3d p = o + t * d;
      keep_nearest(best, t, (p - s.center) / s.size.x());
      break;
    }
  }
  return best;
}

// Box faces intersected one plane at a time.
std::optional<Hit> intersect_box(const Primitive& b, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  std::optional<Hit> best;
  for (int axis = 0; axis < 3; ++axis) {
    if (d[axis] == 0.0) continue;
    for (double side : {-1.0, 1.0}) {
      const double plane = b.center[axis] + side * b.size[axis];
      const double t = (plane - o[axis]) / d[axis];
      if (!(t > kHitEpsilon)) continue;
      const Eigen::Vector3d p = o + t * d;
      bool inside = true;
      for (int other = 0; other < 3 && inside; ++other) {
        if (other == axis) continue;
        inside = std::abs(p[other] - b.center[other]) <= b.size[other] * (1.0 + 1e-12);
      }
      if (inside) keep_nearest(best, t, side * Eigen::Vector3d::Unit(axis));
    }
  }
  return best;
}

std::optional<Hit> intersect_cylinder(const Primitive& cyl, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const double r = cyl.size.x();
  const double hh = cyl.size.y();
  std::optional<Hit> best;
  const double ox = o.x() - cyl.center.x();
  const double oz = o.z() - cyl.center.z();
  const double a = d.x() * d.x() + d.z() * d.z();
  if (a > 0.0) {
    const double b = ox * d.x() + oz * d.z();
    const double c = ox * ox + oz * oz - r * r;
    const double disc = b * b - a * c;
    if (disc >= 0.0) {
      const double root = std::sqrt(disc);
      for (double t : {(-b - root) / a, (-b + root) / a}) {
        const Eigen::Vector3d p = o + t * d;
        if (std::abs(p.y() - cyl.center.y()) <= hh) {
          keep_nearest(best, t, Eigen::Vector3d(p.x() - cyl.center.x(), 0.0, p.z() - cyl.center.z()) / r);
        }
      }
    }
  }
  if (d.y() != 0.0) {
    for (double side : {-1.0, 1.0}) {
      const double t = (cyl.center.y() + side * hh - o.y()) / d.y();
      const Eigen::Vector3d p = o + t * d;
      const double rx = p.x() - cyl.center.x();
      const double rz = p.z() - cyl.center.z();
      if (rx * rx + rz * rz <= r * r) keep_nearest(best, t, side * Eigen::Vector3d::UnitY());
    }
  }
  return best;
}

}  // namespace

std::string_view to_string(PrimitiveKind kind) {
  switch (kind) {
    case PrimitiveKind::kSphere: return "sphere";
    case PrimitiveKind::kBox: return "box";
    case PrimitiveKind::kCylinder: return "cylinder";
  }
  return "unknown";
}

double Primitive::bounding_radius() const {
  switch (kind) {
    case PrimitiveKind::kSphere: return size.x();
    case PrimitiveKind::kBox: return size.norm();
    case PrimitiveKind::kCylinder: return std::hypot(size.x(), size.y());
  }
  return 0.0;
}

bool Primitive::contains(const Eigen::Vector3d& p, double eps) const {
  const Eigen::Vector3d q = p - center;
  switch (kind) {
    case PrimitiveKind::kSphere: return q.norm() < size.x() - eps;
    case PrimitiveKind::kBox:
      return std::abs(q.x()) < size.x() - eps && std::abs(q.y()) < size.y() - eps &&
             std::abs(q.z()) < size.z() - eps;
    case PrimitiveKind::kCylinder:
      return std::hypot(q.x(), q.z()) < size.x() - eps && std::abs(q.y()) < size.y() - eps;
  }
  return false;
}

ProceduralScene make_scene(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5eed5cE11eULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  ProceduralScene scene;
  scene.seed = seed;
  const int count = 1 + static_cast<int>(unit(rng) * 6.0);
  for (int i = 0; i < count; ++i) {
    Primitive p;
    p.kind = static_cast<PrimitiveKind>(std::min(2, static_cast<int>(unit(rng) * 3.0)));
    switch (p.kind) {
      case PrimitiveKind::kSphere: p.size = Eigen::Vector3d(uniform(0.15, 0.5), 0.0, 0.0); break;
      case PrimitiveKind::kBox:
        p.size = Eigen::Vector3d(uniform(0.1, 0.4), uniform(0.1, 0.4), uniform(0.1, 0.4));
        break;
      case PrimitiveKind::kCylinder: p.size = Eigen::Vector3d(uniform(0.1, 0.35), uniform(0.1, 0.45), 0.0); break;
    }
    // Uniform center in the ball that keeps the primitive inside the unit ball.
    const double room = std::min(0.55, 1.0 - p.bounding_radius());
    Eigen::Vector3d dir;
    do {
      dir = Eigen::Vector3d(uniform(-1, 1), uniform(-1, 1), uniform(-1, 1));
    } while (dir.squaredNorm() > 1.0 || dir.squaredNorm() < 1e-12);
    p.center = dir * room * std::cbrt(unit(rng)) / dir.norm();
    p.albedo = Eigen::Vector3d(uniform(0.1, 0.85), uniform(0.1, 0.85), uniform(0.1, 0.85));
    scene.primitives.push_back(p);
  }
  return scene;
}

std::optional<Hit> intersect(const Primitive& prim, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  switch (prim.kind) {
    case PrimitiveKind::kSphere: return intersect_sphere(prim, origin, dir);
    case PrimitiveKind::kBox: return intersect_box(prim, origin, dir);
    case PrimitiveKind::kCylinder: return intersect_cylinder(prim, origin, dir);
  }
  return std::nullopt;
}

std::optional<Hit> intersect(const ProceduralScene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    auto hit = intersect(scene.primitives[i], origin, dir);
    if (hit && (!best || hit->t < best->t)) {
      best = hit;
      best->primitive = static_cast<int>(i);
    }
  }
  return best;
}

namespace {

double surface_area(const Primitive& p) {
  const double pi = std::numbers::pi;
  switch (p.kind) {
    case PrimitiveKind::kSphere: return 4.0 * pi * p.size.x() * p.size.x();
    case PrimitiveKind::kBox:
      return 8.0 * (p.size.x() * p.size.y() + p.size.y() * p.size.z() + p.size.x() * p.size.z());
    case PrimitiveKind::kCylinder:
      return 2.0 * pi * p.size.x() * p.size.x() + 4.0 * pi * p.size.x() * p.size.y();
  }
  return 0.0;
}

Eigen::Vector3d sample_on(const Primitive& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double pi = std::numbers::pi;
  switch (p.kind) {
    case PrimitiveKind::kSphere: {
      Eigen::Vector3d v(normal(rng), normal(rng), normal(rng));
      return p.center + p.size.x() * v.normalized();
    }
    case PrimitiveKind::kBox: {
      const Eigen::Vector3d& h = p.size;
      const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
      double pick = unit(rng) * (areas[0] + areas[1] + areas[2]);
      int axis = 0;
      while (axis < 2 && pick > areas[axis]) pick -= areas[axis++];
      Eigen::Vector3d q(unit(rng) * 2 - 1, unit(rng) * 2 - 1, unit(rng) * 2 - 1);
      q[axis] = unit(rng) < 0.5 ? -1.0 : 1.0;
      return p.center + q.cwiseProduct(h);
    }
    case PrimitiveKind::kCylinder: {
      const double r = p.size.x();
      const double hh = p.size.y();
      const double side = 4.0 * pi * r * hh;
      const double caps = 2.0 * pi * r * r;
      const double phi = 2.0 * pi * unit(rng);
      if (unit(rng) * (side + caps) < side) {
        return p.center + Eigen::Vector3d(r * std::cos(phi), hh * (2 * unit(rng) - 1), r * std::sin(phi));
      }
      const double rho = r * std::sqrt(unit(rng));
      const double y = unit(rng) < 0.5 ? -hh : hh;
      return p.center + Eigen::Vector3d(rho * std::cos(phi), y, rho * std::sin(phi));
    }
  }
  return p.center;
}

}  // namespace

std::vector<Eigen::Vector3d> sample_surface(const ProceduralScene& scene, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> cumulative;
  double total = 0.0;
  for (const auto& p : scene.primitives) cumulative.push_back(total += surface_area(p));
  std::uniform_real_distribution<double> unit(0.0, total);
  std::vector<Eigen::Vector3d> out;
  out.reserve(count);
  std::size_t attempts = 0;
  while (out.size() < count && attempts < count * 50) {
    ++attempts;
    const double pick = unit(rng);
    const auto idx = static_cast<std::size_t>(
        std::lower_bound(cumulative.begin(), cumulative.end(), pick) - cumulative.begin());
    const std::size_t which = std::min(idx, scene.primitives.size() - 1);
    const Eigen::Vector3d p = sample_on(scene.primitives[which], rng);
    bool hidden = false;
    for (std::size_t j = 0; j < scene.primitives.size() && !hidden; ++j) {
      if (j != which) hidden = scene.primitives[j].contains(p, 1e-9);
    }
    if (!hidden) out.push_back(p);
  }
  return out;
}

}  // namespace rng::scenegen
