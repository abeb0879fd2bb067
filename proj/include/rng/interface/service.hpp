// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <list>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "rng/evaluation/evaluate.hpp"
#include "rng/geometry/pointcloud.hpp"
#include "rng/interface/rngt.hpp"
#include "rng/model/model.hpp"

namespace rng::service {

struct ServiceOptions {
  std::size_t max_sessions = 16;
  /// Foreground tolerance used by accumulate.
  double background_tolerance = 0.1;
};

/// One uploaded scene: the sealed stage-1 cache plus an append-only cloud.
struct Session {
  std::string id;
  attention::SceneCache cache;
  std::vector<geometry::CameraPose> poses;
  /// Stage-2 outputs at the predicted source poses.
  io::RngtContainer source_maps;
  std::string cache_hash;
  std::int64_t created_unix_ms = 0;

  mutable std::shared_mutex cloud_mutex;
  geometry::PointCloud cloud;
  /// Serializes accumulations on this session.
  std::mutex accumulate_mutex;
};

struct RenderResult {
  geometry::CameraPose pose;
  model::TargetMaps maps;
  ImageF depth;
};

struct AccumulateResult {
  std::size_t points_added = 0;
  std::size_t total_points = 0;
};

/// Session registry with LRU eviction. Renders on one session run
/// concurrently against its read-only cache; accumulations on one session
/// are serialized.
class InferenceService {
 public:
  InferenceService(std::shared_ptr<const model::RnG<float>> model, ServiceOptions options = {});

  const model::RnG<float>& model() const { return *model_; }
  const ServiceOptions& options() const { return options_; }

  /// Exactly num_sources RGB images at the model resolution.
  std::shared_ptr<const Session> create_session(const std::vector<ImageF>& images);
  /// Throws kNotFound for unknown or evicted ids.
  std::shared_ptr<Session> get(const std::string& id);
  RenderResult render(const std::string& id, const geometry::CameraPose& pose);
  AccumulateResult accumulate(const std::string& id, const geometry::CameraPose& pose, double conf_quantile);
  geometry::PointCloud pointcloud(const std::string& id);
  void remove(const std::string& id);
  std::size_t size() const;

  /// Pose with the model's intrinsics; throws kInvalidCamera unless the
  /// rotation is orthonormal with det +1.
  geometry::CameraPose make_pose(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& center) const;

 private:
  std::string new_id();
  void touch(const std::string& id);

  std::shared_ptr<const model::RnG<float>> model_;
  ServiceOptions options_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::list<std::string> lru_;  // most recent first
  std::uint64_t id_state_;
};

/// Wire format: {"rotation": 9 row-major floats, "center": 3 floats}.
nlohmann::json pose_to_json(const geometry::CameraPose& pose);
/// Parses the wire format; malformed shapes throw kInvalidArgument.
std::pair<Eigen::Matrix3d, Eigen::Vector3d> pose_from_json(const nlohmann::json& j);

/// rgb, depth, pointmap and confidence tensors of one rendered view.
io::RngtContainer maps_container(const model::TargetMaps& maps, const ImageF& depth);

}  // namespace rng::service
