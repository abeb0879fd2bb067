// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/evaluation/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "rng/common/error.hpp"

namespace rng::evaluation {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Fn>
double time_ms(Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<ImageF> images_of(std::span<const scenegen::RenderedView> views) {
  std::vector<ImageF> out;
  for (const auto& v : views) out.push_back(v.rgb);
  return out;
}

nlohmann::json pose_json(const PoseMetrics& m, const PoseThresholds& t) {
  return {{fmt::format("RA@{:g}", t.rotation_deg), m.ra},
          {fmt::format("RT@{:g}", t.translation_deg), m.rt},
          {fmt::format("AUC@{}", t.auc_max_deg), m.auc}};
}

}  // namespace

Mask predicted_foreground(const ImageF& rgb, double tolerance) {
  require(rgb.channels == 3, ErrorCode::kShapeMismatch, "expected an RGB image");
  Mask m(rgb.height, rgb.width, 1, 0);
  for (std::size_t i = 0; i < rgb.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      if (1.0 - rgb.data[i * 3 + static_cast<std::size_t>(c)] > tolerance) m.data[i] = 1;
    }
  }
  return m;
}

geometry::PointCloud filter_points(const model::TargetMaps& maps, const ScanOptions& options) {
  require(options.conf_quantile >= 0.0 && options.conf_quantile <= 1.0, ErrorCode::kInvalidArgument,
          "confidence quantile must lie in [0, 1]");
  const auto fg = predicted_foreground(maps.rgb, options.background_tolerance);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < fg.pixels(); ++i) {
    if (fg.data[i] != 0) idx.push_back(i);
  }
  const auto keep = static_cast<std::size_t>(std::floor((1.0 - options.conf_quantile) * static_cast<double>(idx.size())));
  // Highest confidence first; ties keep pixel order.
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return maps.confidence.data[a] > maps.confidence.data[b]; });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  geometry::PointCloud cloud;
  for (std::size_t i : idx) {
    cloud.points.emplace_back(maps.pointmap.data[i * 3], maps.pointmap.data[i * 3 + 1], maps.pointmap.data[i * 3 + 2]);
    cloud.colors.emplace_back(maps.rgb.data[i * 3], maps.rgb.data[i * 3 + 1], maps.rgb.data[i * 3 + 2]);
    cloud.confidences.push_back(maps.confidence.data[i]);
  }
  return cloud;
}

geometry::PointCloud scan(const model::RnG<float>& model, const attention::SceneCache& cache,
                          std::span<const geometry::CameraPose> poses, const ScanOptions& options) {
  require(!poses.empty(), ErrorCode::kInvalidArgument, "scan needs at least one query pose");
  geometry::PointCloud cloud;
  for (const auto& pose : poses) {
    const auto maps = model.run_stage2(std::span(&pose, 1), cache);
    cloud.append(filter_points(maps.front(), options));
  }
  require(!cloud.empty(), ErrorCode::kEmptyInput, "confidence threshold too high: the accumulated cloud is empty");
  return cloud;
}

std::vector<geometry::CameraPose> sphere_poses(int count, double radius, int resolution) {
  require(count > 0, ErrorCode::kInvalidArgument, "sphere needs at least one pose");
  require(radius > 0.0, ErrorCode::kInvalidArgument, "sphere radius must be positive");
  const auto k = geometry::default_intrinsics(resolution, resolution);
  const double golden = kPi * (3.0 - std::sqrt(5.0));
  std::vector<geometry::CameraPose> out;
  for (int i = 0; i < count; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi = golden * i;
    const Eigen::Vector3d dir(r * std::cos(phi), y, r * std::sin(phi));
    out.push_back(geometry::look_at(radius * dir, Eigen::Vector3d::Zero(), k, resolution, resolution,
                                    -Eigen::Vector3d::UnitY()));
  }
  return out;
}

geometry::PointCloud untransform(const geometry::PointCloud& cloud, const geometry::Similarity& sim) {
  geometry::PointCloud out = cloud;
  const Eigen::Matrix3d rt = sim.rotation.transpose();
  for (auto& p : out.points) p = (rt * (p.cast<double>() - sim.translation) / sim.scale).cast<float>();
  return out;
}

namespace {

geometry::PointCloud surface_cloud(const scenegen::ProceduralScene& scene, std::size_t samples) {
  geometry::PointCloud gt;
  for (const auto& p : scenegen::sample_surface(scene, samples, scene.seed ^ 0x5C4A11ULL)) gt.points.push_back(p.cast<float>());
  return gt;
}

}  // namespace

ScanResult scan_and_chamfer(const model::RnG<float>& model, const scenegen::ProceduralScene& scene,
                            std::span<const scenegen::RenderedView> sources,
                            std::span<const geometry::CameraPose> query_poses, const ScanOptions& options,
                            std::size_t surface_samples) {
  std::vector<geometry::CameraPose> poses;
  for (const auto& v : sources) poses.push_back(v.pose);
  const auto normalized = geometry::normalize_cameras(poses);
  const auto stage1 = model.run_stage1(images_of(sources));
  ScanResult r;
  r.cloud = untransform(scan(model, stage1.cache, query_poses, options), normalized.similarity);
  r.chamfer = geometry::chamfer_distance(r.cloud, surface_cloud(scene, surface_samples));
  return r;
}

void EvalConfig::validate() const {
  require(scenes >= 1, ErrorCode::kInvalidArgument, "scenes must be positive");
  require(targets >= 1, ErrorCode::kInvalidArgument, "targets must be positive");
  require(views_per_scene >= targets + scenegen::kSourceViews, ErrorCode::kInvalidArgument,
          "views_per_scene must cover the targets and four sources");
  require(surface_samples > 0, ErrorCode::kInvalidArgument, "surface_samples must be positive");
}

std::uint64_t held_out_scene_seed(std::uint64_t seed, int index) {
  return 1'000'000ULL + seed * 100'000ULL + static_cast<std::uint64_t>(index);
}

EvalScene make_eval_scene(std::uint64_t scene_seed, int resolution, const EvalConfig& config) {
  scenegen::DataConfig data;
  data.width = data.height = resolution;
  data.views_per_scene = config.views_per_scene;
  EvalScene s;
  s.scene = scenegen::make_scene(scene_seed);
  const auto rig = scenegen::scene_cameras(scene_seed, data);

  std::vector<int> perm(rig.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(splitmix(scene_seed ^ 0xE7A1ULL));
  for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
  // Targets first, then sources drawn from the remaining views.
  std::vector<geometry::CameraPose> target_poses, source_poses;
  for (int t = 0; t < config.targets; ++t) target_poses.push_back(rig[static_cast<std::size_t>(perm[static_cast<std::size_t>(t)])]);
  for (int k = 0; k < scenegen::kSourceViews; ++k) {
    source_poses.push_back(rig[static_cast<std::size_t>(perm[static_cast<std::size_t>(config.targets + k)])]);
  }

  const scenegen::RenderOptions opts{data.antialias};
  const auto normalized = geometry::normalize_cameras(source_poses);
  s.similarity = normalized.similarity;
  for (std::size_t k = 0; k < source_poses.size(); ++k) {
    auto v = scenegen::normalize_view(scenegen::render_rgbd(s.scene, source_poses[k], opts), s.similarity);
    v.pose = normalized.poses[k];
    v.pointmap = geometry::depth_to_pointmap(v.depth, v.pose);
    s.sources.push_back(std::move(v));
  }
  for (const auto& p : target_poses) {
    s.targets.push_back(scenegen::normalize_view(scenegen::render_rgbd(s.scene, p, opts), s.similarity));
  }
  return s;
}

ImageF mean_color_image(std::span<const scenegen::RenderedView> sources) {
  require(!sources.empty(), ErrorCode::kEmptyInput, "no source views");
  double sum[3] = {0, 0, 0};
  std::size_t n = 0;
  for (const auto& v : sources) {
    for (std::size_t i = 0; i < v.rgb.pixels(); ++i) {
      for (int c = 0; c < 3; ++c) sum[c] += v.rgb.data[i * 3 + static_cast<std::size_t>(c)];
    }
    n += v.rgb.pixels();
  }
  const auto& first = sources.front().rgb;
  ImageF out(first.height, first.width, 3);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) out.data[i * 3 + static_cast<std::size_t>(c)] = static_cast<float>(sum[c] / n);
  }
  return out;
}

EvalReport evaluate(const model::RnG<float>& model, const EvalConfig& config) {
  config.validate();
  const int res = model.config().resolution;
  EvalReport r;
  r.scenes = config.scenes;
  r.relaxed_thresholds = config.relaxed_pose;
  std::vector<PairError> pairs;
  double src_rel = 0, src_a1 = 0, nov_rel = 0, nov_a1 = 0, psnr_sum = 0, ssim_sum = 0, base_psnr = 0, base_ssim = 0;
  int src_n = 0, nov_n = 0;
  for (int k = 0; k < config.scenes; ++k) {
    const auto s = make_eval_scene(held_out_scene_seed(config.seed, k), res, config);
    const auto stage1 = model.run_stage1(images_of(s.sources));

    std::vector<geometry::CameraPose> gt_sources;
    for (const auto& v : s.sources) gt_sources.push_back(v.pose);
    const auto e = relative_pose_errors(stage1.poses, gt_sources);
    pairs.insert(pairs.end(), e.begin(), e.end());

    const auto& first = stage1.poses.front();
    const double rot = geodesic_deg(first.rotation);
    const double ctr = (first.center - Eigen::Vector3d(0, 0, -1)).norm();
    r.first_view.rotation_deg_mean += rot / config.scenes;
    r.first_view.center_mean += ctr / config.scenes;
    r.first_view.rotation_deg_max = std::max(r.first_view.rotation_deg_max, rot);
    r.first_view.center_max = std::max(r.first_view.center_max, ctr);

    // Queries at the known target poses, then at the known source poses.
    std::vector<geometry::CameraPose> queries;
    for (const auto& v : s.targets) queries.push_back(v.pose);
    for (const auto& v : s.sources) queries.push_back(v.pose);
    const auto maps = model.run_stage2(queries, stage1.cache);

    const auto baseline = mean_color_image(s.sources);
    geometry::PointCloud accumulated;
    for (std::size_t t = 0; t < s.targets.size(); ++t) {
      const auto& view = s.targets[t];
      const auto im = image_metrics(maps[t].rgb, view.rgb);
      const auto bm = image_metrics(baseline, view.rgb);
      psnr_sum += im.psnr;
      ssim_sum += im.ssim;
      base_psnr += bm.psnr;
      base_ssim += bm.ssim;
      const auto d = depth_metrics(geometry::pointmap_to_depth(maps[t].pointmap, view.pose), view.depth, view.mask,
                                   config.depth_delta);
      nov_rel += d.rel;
      nov_a1 += d.a1;
      ++nov_n;
      accumulated.append(filter_points(maps[t], config.scan));
    }
    for (std::size_t j = 0; j < s.sources.size(); ++j) {
      const auto& view = s.sources[j];
      const auto d = depth_metrics(geometry::pointmap_to_depth(maps[s.targets.size() + j].pointmap, view.pose),
                                   view.depth, view.mask, config.depth_delta);
      src_rel += d.rel;
      src_a1 += d.a1;
      ++src_n;
    }
    if (accumulated.empty()) continue;  // no predicted foreground in any target
    r.cd += geometry::chamfer_distance(untransform(accumulated, s.similarity),
                                       surface_cloud(s.scene, config.surface_samples));
    ++r.cd_scenes;
  }
  r.cd = r.cd_scenes > 0 ? r.cd / r.cd_scenes : std::numeric_limits<double>::quiet_NaN();
  r.pose = pose_metrics(pairs, config.pose);
  r.pose_relaxed = pose_metrics(pairs, config.relaxed_pose);
  r.source_depth = {src_rel / src_n, src_a1 / src_n};
  r.novel_depth = {nov_rel / nov_n, nov_a1 / nov_n};
  r.nvs = {psnr_sum / nov_n, ssim_sum / nov_n};
  r.mean_color_baseline = {base_psnr / nov_n, base_ssim / nov_n};
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j;
  j["scenes"] = scenes;
  j["pose"] = pose_json(pose, PoseThresholds{});
  j["pose_relaxed"] = pose_json(pose_relaxed, relaxed_thresholds);
  j["source_depth"] = {{"Rel", source_depth.rel}, {"a1", source_depth.a1}};
  j["novel_depth"] = {{"Rel", novel_depth.rel}, {"a1", novel_depth.a1}};
  j["nvs"] = {{"PSNR", nvs.psnr}, {"SSIM", nvs.ssim}};
  j["mean_color_baseline"] = {{"PSNR", mean_color_baseline.psnr}, {"SSIM", mean_color_baseline.ssim}};
  j["cd"] = std::isfinite(cd) ? nlohmann::json(cd) : nlohmann::json(nullptr);
  j["cd_scenes"] = cd_scenes;
  j["first_view"] = {{"rotation_deg_mean", first_view.rotation_deg_mean},
                     {"rotation_deg_max", first_view.rotation_deg_max},
                     {"center_mean", first_view.center_mean},
                     {"center_max", first_view.center_max}};
  return j;
}

std::string EvalReport::to_csv() const {
  std::ostringstream s;
  s << "RA@5,RT@5,AUC@30,source_Rel,source_a1,novel_Rel,novel_a1,PSNR,SSIM,CD\n";
  s << fmt::format("{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.6f}\n", pose.ra, pose.rt,
                   pose.auc, source_depth.rel, source_depth.a1, novel_depth.rel, novel_depth.a1, nvs.psnr, nvs.ssim,
                   cd);
  return s.str();
}

model::ModelConfig large_scale_config() {
  model::ModelConfig c;
  c.layers = 24;
  c.dim = 1024;
  c.heads = 16;
  c.patch = 16;
  c.registers = 4;
  c.resolution = 512;
  c.mlp_ratio = 4;
  c.camera_hidden = 1024;
  c.head_width = 256;
  c.head_channels = {128, 64, 32, 16};
  c.validate();
  return c;
}

nlohmann::json BenchReport::to_json() const {
  return {{"sources", sources},
          {"queries", queries},
          {"joint_flops", joint_flops},
          {"stage1_flops", stage1_flops},
          {"stage2_flops", stage2_flops},
          {"flop_ratio", flop_ratio},
          {"large_scale_flop_ratio", large_scale_flop_ratio},
          {"reference_ratio", reference_ratio},
          {"joint_ms", joint_ms},
          {"stage1_ms", stage1_ms},
          {"stage2_ms", stage2_ms},
          {"time_ratio", joint_ms > 0 ? stage2_ms / joint_ms : 0.0},
          {"joint_peak_bytes", joint_peak_bytes},
          {"stage2_peak_bytes", stage2_peak_bytes},
          {"cache_bytes", cache_bytes},
          {"weight_bytes", weight_bytes}};
}

BenchReport efficiency_bench(const model::RnG<float>& model, int num_sources, int num_queries,
                             std::uint64_t scene_seed) {
  require(num_queries >= 1, ErrorCode::kInvalidArgument, "queries must be positive");
  const auto& cfg = model.config();
  require(num_sources == cfg.num_sources, ErrorCode::kInvalidArgument,
          fmt::format("the model expects {} sources", cfg.num_sources));
  BenchReport r;
  r.sources = num_sources;
  r.queries = num_queries;
  r.joint_flops = model::analytic_flops(cfg, model::ForwardMode::kJoint, num_sources, 1).total();
  r.stage1_flops = model::analytic_flops(cfg, model::ForwardMode::kStage1, num_sources, 0).total();
  r.stage2_flops = model::analytic_flops(cfg, model::ForwardMode::kStage2, num_sources, 1).total();
  r.flop_ratio = static_cast<double>(r.stage2_flops) / static_cast<double>(r.joint_flops);
  const auto big = large_scale_config();
  r.large_scale_flop_ratio =
      static_cast<double>(model::analytic_flops(big, model::ForwardMode::kStage2, 4, 1).total()) /
      static_cast<double>(model::analytic_flops(big, model::ForwardMode::kJoint, 4, 1).total());
  for (const auto& [name, p] : model.weights().named()) r.weight_bytes += static_cast<std::size_t>(p->value.size()) * sizeof(float);

  EvalConfig ec;
  ec.targets = 1;
  const auto s = make_eval_scene(scene_seed, cfg.resolution, ec);
  const auto images = images_of(s.sources);
  const auto poses = sphere_poses(num_queries, 1.0, cfg.resolution);

  {
    nn::Graph<float> g(false);
    model.forward_joint(g, images, std::span(poses.data(), 1));
    r.joint_peak_bytes = g.value_bytes();
  }
  const auto stage1 = model.run_stage1(images);
  for (int b = 0; b < stage1.cache.num_blocks(); ++b) {
    const auto& blk = stage1.cache.block(b);
    r.cache_bytes += static_cast<std::size_t>(blk.k.size() + blk.v.size()) * sizeof(float);
  }
  {
    nn::Graph<float> g(false);
    model.forward_stage2(g, std::span(poses.data(), 1), stage1.cache);
    r.stage2_peak_bytes = g.value_bytes() + r.cache_bytes;
  }

  // Warmup, then timed queries.
  model.run_joint(images, std::span(poses.data(), 1));
  model.run_stage2(std::span(poses.data(), 1), stage1.cache);
  std::vector<double> joint, stage2, stage1_ms;
  for (int q = 0; q < num_queries; ++q) {
    const auto pose = std::span(poses.data() + q, 1);
    joint.push_back(time_ms([&] { model.run_joint(images, pose); }));
    stage2.push_back(time_ms([&] { model.run_stage2(pose, stage1.cache); }));
  }
  for (int q = 0; q < std::min(num_queries, 5); ++q) stage1_ms.push_back(time_ms([&] { model.run_stage1(images); }));
  r.joint_ms = median(joint);
  r.stage2_ms = median(stage2);
  r.stage1_ms = median(stage1_ms);
  return r;
}

}  // namespace rng::evaluation
