// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "rng/geometry/camera.hpp"
#include "rng/scenegen/render.hpp"
#include "rng/scenegen/scene.hpp"

namespace rng::scenegen {

struct DataConfig {
  int width = 64;
  int height = 64;
  int views_per_scene = 25;
  double radius_min = 1.8;
  double radius_max = 3.2;
  bool antialias = true;
};

inline constexpr int kSourceViews = 4;
inline constexpr int kTargetsPerGroup = 3;
inline constexpr int kViewsPerGroup = kSourceViews + kTargetsPerGroup;

/// Look-at cameras around the origin: directions uniform on the sphere,
/// radii uniform in [r_min, r_max], roll-free with respect to +y.
std::vector<geometry::CameraPose> sample_cameras(std::uint64_t seed, int n, double r_min, double r_max, int width,
                                                 int height);

/// The fixed camera rig of one scene under `config`.
std::vector<geometry::CameraPose> scene_cameras(std::uint64_t scene_seed, const DataConfig& config);

std::vector<RenderedView> render_views(const ProceduralScene& scene, std::span<const geometry::CameraPose> poses,
                                       const RenderOptions& options = {});

/// Four normalized source views shared by several targets.
struct TrainingExample {
  std::shared_ptr<const std::vector<RenderedView>> sources;
  RenderedView target;
  /// Maps the original world frame to the normalized one.
  geometry::Similarity similarity;
  std::array<int, kSourceViews + 1> view_indices{};
};

/// Moves a rendered view into a normalized frame. Depth scales with the
/// similarity; the point map is rebuilt from the scaled depth.
RenderedView normalize_view(const RenderedView& view, const geometry::Similarity& similarity);

/// Seven distinct indices in [0, available).
std::array<int, kViewsPerGroup> sample_view_indices(int available, std::uint64_t seed);

/// Views 0-3 become the shared sources, views 4-6 the three targets. All
/// poses are normalized so that the first source is canonical.
std::vector<TrainingExample> make_examples(std::span<const RenderedView> views,
                                           std::span<const int> indices = {});

std::vector<TrainingExample> sample_batch(std::span<const RenderedView> scene_views, std::uint64_t seed);

/// Same result as rendering the full rig and calling sample_batch, but only
/// the seven selected views are rendered.
std::vector<TrainingExample> sample_scene_group(std::uint64_t scene_seed, std::uint64_t draw_seed,
                                                const DataConfig& config);

/// One RNGT file per scene: rgb.<v>, depth.<v>, pose.<v> (row-major rotation
/// then center) and intrinsics (fx, fy, cx, cy).
void save_scene_views(const std::string& path, std::span<const RenderedView> views, std::uint64_t scene_seed);
std::vector<RenderedView> load_scene_views(const std::string& path);

}  // namespace rng::scenegen
