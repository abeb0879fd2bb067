// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/scenegen/render.hpp"

#include <algorithm>
#include <array>

namespace rng::scenegen {

namespace {

struct Light {
  Eigen::Vector3d direction;  // towards the light
  Eigen::Vector3d color;
};

const std::array<Light, 2>& lights() {
  static const std::array<Light, 2> kLights = {
      Light{Eigen::Vector3d(0.4, 0.8, 0.45).normalized(), Eigen::Vector3d(0.95, 0.8, 0.6)},
      Light{Eigen::Vector3d(-0.6, -0.3, -0.7).normalized(), Eigen::Vector3d(0.35, 0.45, 0.7)},
  };
  return kLights;
}

constexpr double kAmbient = 0.2;

// Rotated-grid offsets inside the unit pixel.
constexpr std::array<std::array<double, 2>, 4> kSubsamples = {{
    {0.375, 0.125}, {0.875, 0.375}, {0.625, 0.875}, {0.125, 0.625}}};

}  // namespace

Eigen::Vector3d shade(const ProceduralScene& scene, const Eigen::Vector3d& origin, const Eigen::Vector3d& dir) {
  const auto hit = intersect(scene, origin, dir);
  if (!hit) return Eigen::Vector3d::Ones();
  const Eigen::Vector3d& albedo = scene.primitives[static_cast<std::size_t>(hit->primitive)].albedo;
  Eigen::Vector3d irradiance = Eigen::Vector3d::Constant(kAmbient);
  for (const auto& light : lights()) {
    irradiance += light.color * std::max(0.0, hit->normal.dot(light.direction));
  }
  return albedo.cwiseProduct(irradiance).cwiseMin(1.0).cwiseMax(0.0);
}

RenderedView render_rgbd(const ProceduralScene& scene, const geometry::CameraPose& pose,
                         const RenderOptions& options) {
  geometry::validate(pose);
  const int h = pose.height;
  const int w = pose.width;
  RenderedView view;
  view.pose = pose;
  view.rgb = ImageF(h, w, 3, 1.0f);
  view.depth = ImageF(h, w, 1, 0.0f);
  const Eigen::Vector3d axis = pose.optical_axis();
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d dir = geometry::pixel_direction(pose, u + 0.5, v + 0.5).normalized();
      if (const auto hit = intersect(scene, pose.center, dir)) {
        view.depth.at(v, u) = static_cast<float>(hit->t * dir.dot(axis));
      }
      Eigen::Vector3d color = Eigen::Vector3d::Zero();
      if (options.antialias) {
        for (const auto& s : kSubsamples) {
          color += shade(scene, pose.center, geometry::pixel_direction(pose, u + s[0], v + s[1]).normalized());
        }
        color /= static_cast<double>(kSubsamples.size());
      } else {
        color = shade(scene, pose.center, dir);
      }
      for (int c = 0; c < 3; ++c) view.rgb.at(v, u, c) = static_cast<float>(color[c]);
    }
  }
  view.pointmap = geometry::depth_to_pointmap(view.depth, pose);
  view.mask = geometry::foreground_mask(view.depth);
  return view;
}

}  // namespace rng::scenegen
