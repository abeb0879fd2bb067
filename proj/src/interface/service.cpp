// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/interface/service.hpp"

#include <chrono>
#include <random>

#include <fmt/format.h>

#include "rng/common/error.hpp"

namespace rng::service {

namespace {

std::vector<float> copy_data(const ImageF& im) { return im.data; }

std::vector<std::uint32_t> dims_of(const ImageF& im) {
  if (im.channels == 1) return {static_cast<std::uint32_t>(im.height), static_cast<std::uint32_t>(im.width)};
  return {static_cast<std::uint32_t>(im.height), static_cast<std::uint32_t>(im.width),
          static_cast<std::uint32_t>(im.channels)};
}

}  // namespace

nlohmann::json pose_to_json(const geometry::CameraPose& pose) {
  nlohmann::json r = nlohmann::json::array(), c = nlohmann::json::array();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) r.push_back(pose.rotation(i, j));
  }
  for (int i = 0; i < 3; ++i) c.push_back(pose.center(i));
  return {{"rotation", r}, {"center", c}};
}

std::pair<Eigen::Matrix3d, Eigen::Vector3d> pose_from_json(const nlohmann::json& j) {
  const auto numbers = [&](const char* key, std::size_t n) {
    require(j.is_object() && j.contains(key) && j[key].is_array() && j[key].size() == n,
            ErrorCode::kInvalidArgument, fmt::format("pose.{} must be an array of {} numbers", key, n));
    std::vector<double> v;
    for (const auto& x : j[key]) {
      require(x.is_number(), ErrorCode::kInvalidArgument, fmt::format("pose.{} must hold numbers", key));
      v.push_back(x.get<double>());
    }
    return v;
  };
  const auto r = numbers("rotation", 9);
  const auto c = numbers("center", 3);
  Eigen::Matrix3d rot;
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) rot(i, k) = r[static_cast<std::size_t>(i * 3 + k)];
  }
  return {rot, Eigen::Vector3d(c[0], c[1], c[2])};
}

io::RngtContainer maps_container(const model::TargetMaps& maps, const ImageF& depth) {
  io::RngtContainer c;
  c.add("rgb", dims_of(maps.rgb), copy_data(maps.rgb));
  c.add("depth", dims_of(depth), copy_data(depth));
  c.add("pointmap", dims_of(maps.pointmap), copy_data(maps.pointmap));
  c.add("confidence", dims_of(maps.confidence), copy_data(maps.confidence));
  return c;
}

InferenceService::InferenceService(std::shared_ptr<const model::RnG<float>> model, ServiceOptions options)
    : model_(std::move(model)), options_(options), id_state_(std::random_device{}()) {
  require(model_ != nullptr, ErrorCode::kInvalidArgument, "service needs a model");
  require(options_.max_sessions >= 1, ErrorCode::kInvalidArgument, "max_sessions must be positive");
  id_state_ = (id_state_ << 32) ^ static_cast<std::uint64_t>(
                                       std::chrono::steady_clock::now().time_since_epoch().count());
}

geometry::CameraPose InferenceService::make_pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& center) const {
  const int res = model_->config().resolution;
  geometry::CameraPose p = geometry::canonical_pose(geometry::default_intrinsics(res, res), res, res);
  p.rotation = rotation;
  p.center = center;
  geometry::validate(p);
  return p;
}

std::string InferenceService::new_id() {
  // Caller holds the registry lock.
  std::mt19937_64 g(id_state_);
  id_state_ = g();
  return fmt::format("{:016x}{:016x}", g(), g());
}

std::shared_ptr<const Session> InferenceService::create_session(const std::vector<ImageF>& images) {
  const auto& cfg = model_->config();
  require(static_cast<int>(images.size()) == cfg.num_sources, ErrorCode::kInvalidArgument,
          fmt::format("expected {} source images, got {}", cfg.num_sources, images.size()));
  for (const auto& im : images) {
    require(im.height == cfg.resolution && im.width == cfg.resolution && im.channels == 3,
            ErrorCode::kInvalidArgument,
            fmt::format("source images must be {0}x{0} RGB, got {1}x{2}", cfg.resolution, im.width, im.height));
  }
  auto stage1 = model_->run_stage1(images);
  auto session = std::make_shared<Session>();
  session->poses = stage1.poses;
  const auto maps = model_->run_stage2(stage1.poses, stage1.cache);
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const auto depth = geometry::pointmap_to_depth(maps[i].pointmap, stage1.poses[i]);
    const auto c = maps_container(maps[i], depth);
    for (const auto& t : c.tensors()) session->source_maps.add(fmt::format("{}.{}", t.name, i), t.dims, t.data);
  }
  nlohmann::json poses = nlohmann::json::array();
  for (const auto& p : stage1.poses) poses.push_back(pose_to_json(p));
  session->source_maps.metadata()["poses"] = poses;
  session->cache = std::move(stage1.cache);
  session->cache_hash = session->cache.content_hash();
  session->created_unix_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                 std::chrono::system_clock::now().time_since_epoch())
                                 .count();

  std::unique_lock lock(mutex_);
  session->id = new_id();
  sessions_[session->id] = session;
  lru_.push_front(session->id);
  while (sessions_.size() > options_.max_sessions) {
    sessions_.erase(lru_.back());
    lru_.pop_back();
  }
  return session;
}

std::shared_ptr<Session> InferenceService::get(const std::string& id) {
  {
    std::shared_lock lock(mutex_);
    if (!sessions_.contains(id)) fail(ErrorCode::kNotFound, "unknown session " + id);
  }
  std::unique_lock lock(mutex_);
  const auto it = sessions_.find(id);
  require(it != sessions_.end(), ErrorCode::kNotFound, "unknown session " + id);
  lru_.remove(id);
  lru_.push_front(id);
  return it->second;
}

RenderResult InferenceService::render(const std::string& id, const geometry::CameraPose& pose) {
  const auto s = get(id);
  RenderResult r;
  r.pose = pose;
  r.maps = model_->run_stage2(std::span(&pose, 1), s->cache).front();
  r.depth = geometry::pointmap_to_depth(r.maps.pointmap, pose);
  return r;
}

AccumulateResult InferenceService::accumulate(const std::string& id, const geometry::CameraPose& pose,
                                              double conf_quantile) {
  const auto s = get(id);
  require(conf_quantile >= 0.0 && conf_quantile <= 1.0, ErrorCode::kInvalidArgument,
          "conf_quantile must lie in [0, 1]");
  std::lock_guard serial(s->accumulate_mutex);
  const auto maps = model_->run_stage2(std::span(&pose, 1), s->cache).front();
  evaluation::ScanOptions opt;
  opt.conf_quantile = conf_quantile;
  opt.background_tolerance = options_.background_tolerance;
  const auto added = evaluation::filter_points(maps, opt);
  require(!added.empty(), ErrorCode::kEmptyInput, "no points survive the confidence quantile");
  std::unique_lock lock(s->cloud_mutex);
  s->cloud.append(added);
  return {added.size(), s->cloud.size()};
}

geometry::PointCloud InferenceService::pointcloud(const std::string& id) {
  const auto s = get(id);
  std::shared_lock lock(s->cloud_mutex);
  return s->cloud;
}

void InferenceService::remove(const std::string& id) {
  std::unique_lock lock(mutex_);
  require(sessions_.erase(id) == 1, ErrorCode::kNotFound, "unknown session " + id);
  lru_.remove(id);
}

std::size_t InferenceService::size() const {
  std::shared_lock lock(mutex_);
  return sessions_.size();
}

}  // namespace rng::service
