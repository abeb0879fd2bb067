// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/scenegen/dataset.hpp"

#include <numeric>
#include <random>

#include "rng/common/error.hpp"
#include "rng/interface/rngt.hpp"

namespace rng::scenegen {

std::vector<geometry::CameraPose> sample_cameras(std::uint64_t seed, int n, double r_min, double r_max, int width,
                                                 int height) {
  require(r_min > 1.0, ErrorCode::kInvalidArgument, "camera radius must stay outside the unit ball");
  require(r_max >= r_min, ErrorCode::kInvalidArgument, "camera radius range is empty");
  require(n >= 1, ErrorCode::kInvalidArgument, "at least one camera is required");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> radius(r_min, r_max);
  const auto intrinsics = geometry::default_intrinsics(width, height);
  std::vector<geometry::CameraPose> poses;
  poses.reserve(static_cast<std::size_t>(n));
  while (static_cast<int>(poses.size()) < n) {
    Eigen::Vector3d dir(normal(rng), normal(rng), normal(rng));
    const double r = radius(rng);
    if (dir.norm() < 1e-9) continue;
    poses.push_back(geometry::look_at(dir.normalized() * r, Eigen::Vector3d::Zero(), intrinsics, width, height));
  }
  return poses;
}

std::vector<geometry::CameraPose> scene_cameras(std::uint64_t scene_seed, const DataConfig& config) {
  return sample_cameras(scene_seed * 0x9E3779B97F4A7C15ULL + 0xCA3E5A, config.views_per_scene, config.radius_min,
                        config.radius_max, config.width, config.height);
}

std::vector<RenderedView> render_views(const ProceduralScene& scene, std::span<const geometry::CameraPose> poses,
                                       const RenderOptions& options) {
  std::vector<RenderedView> views;
  views.reserve(poses.size());
  for (const auto& pose : poses) views.push_back(render_rgbd(scene, pose, options));
  return views;
}

RenderedView normalize_view(const RenderedView& view, const geometry::Similarity& similarity) {
  RenderedView out;
  out.pose = similarity.apply(view.pose);
  out.rgb = view.rgb;
  out.depth = view.depth;
  for (auto& d : out.depth.data) d = static_cast<float>(d * similarity.scale);
  out.pointmap = geometry::depth_to_pointmap(out.depth, out.pose);
  out.mask = view.mask;
  return out;
}

std::array<int, kViewsPerGroup> sample_view_indices(int available, std::uint64_t seed) {
  require(available >= kViewsPerGroup, ErrorCode::kInvalidArgument,
          "a training group needs at least 7 views, got " + std::to_string(available));
  std::vector<int> order(static_cast<std::size_t>(available));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::array<int, kViewsPerGroup> picked{};
  for (int i = 0; i < kViewsPerGroup; ++i) {
    std::uniform_int_distribution<int> pick(i, available - 1);
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(pick(rng))]);
    picked[static_cast<std::size_t>(i)] = order[static_cast<std::size_t>(i)];
  }
  return picked;
}

std::vector<TrainingExample> make_examples(std::span<const RenderedView> views, std::span<const int> indices) {
  require(views.size() >= static_cast<std::size_t>(kViewsPerGroup), ErrorCode::kInvalidArgument,
          "a training group needs 7 views");
  std::vector<geometry::CameraPose> poses;
  for (const auto& v : views.first(kSourceViews)) poses.push_back(v.pose);
  const auto normalized = geometry::normalize_cameras(poses);
  const auto& sim = normalized.similarity;

  auto sources = std::make_shared<std::vector<RenderedView>>();
  for (int s = 0; s < kSourceViews; ++s) {
    auto view = normalize_view(views[static_cast<std::size_t>(s)], sim);
    // normalize_cameras snaps the first pose to the exact canonical pose.
    view.pose = normalized.poses[static_cast<std::size_t>(s)];
    view.pointmap = geometry::depth_to_pointmap(view.depth, view.pose);
    sources->push_back(std::move(view));
  }

  std::vector<TrainingExample> examples;
  for (int t = 0; t < kTargetsPerGroup; ++t) {
    TrainingExample ex;
    ex.sources = sources;
    ex.target = normalize_view(views[static_cast<std::size_t>(kSourceViews + t)], sim);
    ex.similarity = sim;
    if (indices.size() >= static_cast<std::size_t>(kViewsPerGroup)) {
      for (int s = 0; s < kSourceViews; ++s) ex.view_indices[static_cast<std::size_t>(s)] = indices[static_cast<std::size_t>(s)];
      ex.view_indices[kSourceViews] = indices[static_cast<std::size_t>(kSourceViews + t)];
    }
    examples.push_back(std::move(ex));
  }
  return examples;
}

std::vector<TrainingExample> sample_batch(std::span<const RenderedView> scene_views, std::uint64_t seed) {
  const auto indices = sample_view_indices(static_cast<int>(scene_views.size()), seed);
  std::vector<RenderedView> picked;
  for (int i : indices) picked.push_back(scene_views[static_cast<std::size_t>(i)]);
  return make_examples(picked, indices);
}

std::vector<TrainingExample> sample_scene_group(std::uint64_t scene_seed, std::uint64_t draw_seed,
                                                const DataConfig& config) {
  const auto scene = make_scene(scene_seed);
  const auto rig = scene_cameras(scene_seed, config);
  const auto indices = sample_view_indices(static_cast<int>(rig.size()), draw_seed);
  std::vector<RenderedView> picked;
  for (int i : indices) {
    picked.push_back(render_rgbd(scene, rig[static_cast<std::size_t>(i)], RenderOptions{config.antialias}));
  }
  return make_examples(picked, indices);
}

void save_scene_views(const std::string& path, std::span<const RenderedView> views, std::uint64_t scene_seed) {
  require(!views.empty(), ErrorCode::kEmptyInput, "no views to save");
  io::RngtContainer c;
  const auto& first = views.front().pose;
  const auto& k = first.intrinsics;
  c.add("intrinsics", {4}, {static_cast<float>(k.fx), static_cast<float>(k.fy), static_cast<float>(k.cx),
                            static_cast<float>(k.cy)});
  const auto h = static_cast<std::uint32_t>(first.height);
  const auto w = static_cast<std::uint32_t>(first.width);
  for (std::size_t v = 0; v < views.size(); ++v) {
    const auto& view = views[v];
    const auto suffix = "." + std::to_string(v);
    c.add("rgb" + suffix, {h, w, 3}, view.rgb.data);
    c.add("depth" + suffix, {h, w}, view.depth.data);
    std::vector<float> pose;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) pose.push_back(static_cast<float>(view.pose.rotation(r, col)));
    }
    for (int i = 0; i < 3; ++i) pose.push_back(static_cast<float>(view.pose.center[i]));
    c.add("pose" + suffix, {12}, std::move(pose));
  }
  c.metadata() = {{"kind", "scene_views"},
                  {"scene_seed", scene_seed},
                  {"views", views.size()},
                  {"width", first.width},
                  {"height", first.height},
                  // float32 tensors lose pose precision; keep the exact values here.
                  {"poses", nlohmann::json::array()}};
  for (const auto& view : views) {
    nlohmann::json p;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) p["rotation"].push_back(view.pose.rotation(r, col));
    }
    for (int i = 0; i < 3; ++i) p["center"].push_back(view.pose.center[i]);
    p["intrinsics"] = {view.pose.intrinsics.fx, view.pose.intrinsics.fy, view.pose.intrinsics.cx,
                       view.pose.intrinsics.cy};
    c.metadata()["poses"].push_back(p);
  }
  c.save(path);
}

std::vector<RenderedView> load_scene_views(const std::string& path) {
  const auto c = io::RngtContainer::load(path);
  const auto& meta = c.metadata();
  require(meta.value("kind", "") == "scene_views", ErrorCode::kCorruptFile, path + " is not a scene dump");
  const int w = meta.at("width").get<int>();
  const int h = meta.at("height").get<int>();
  const auto count = meta.at("views").get<std::size_t>();
  std::vector<RenderedView> views;
  for (std::size_t v = 0; v < count; ++v) {
    const auto suffix = "." + std::to_string(v);
    const auto& pj = meta.at("poses").at(v);
    RenderedView view;
    view.pose.width = w;
    view.pose.height = h;
    for (int r = 0; r < 3; ++r) {
      for (int col = 0; col < 3; ++col) view.pose.rotation(r, col) = pj.at("rotation").at(r * 3 + col).get<double>();
    }
    for (int i = 0; i < 3; ++i) view.pose.center[i] = pj.at("center").at(i).get<double>();
    const auto& k = pj.at("intrinsics");
    view.pose.intrinsics = {k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>(), k.at(3).get<double>()};
    geometry::validate(view.pose);
    const auto& rgb = c.get("rgb" + suffix);
    const auto& depth = c.get("depth" + suffix);
    require(rgb.numel() == static_cast<std::size_t>(h) * w * 3 && depth.numel() == static_cast<std::size_t>(h) * w,
            ErrorCode::kCorruptFile, "scene dump tensor sizes do not match the metadata");
    view.rgb = ImageF(h, w, 3);
    view.rgb.data = rgb.data;
    view.depth = ImageF(h, w, 1);
    view.depth.data = depth.data;
    view.pointmap = geometry::depth_to_pointmap(view.depth, view.pose);
    view.mask = geometry::foreground_mask(view.depth);
    views.push_back(std::move(view));
  }
  return views;
}

}  // namespace rng::scenegen
