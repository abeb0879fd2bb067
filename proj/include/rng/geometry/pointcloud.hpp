// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rng/geometry/camera.hpp"

namespace rng::geometry {

/// World-space points with optional per-point colors in [0,1] and
/// confidences. Optional attributes are either empty or sized like `points`.
struct PointCloud {
  std::vector<Eigen::Vector3f> points;
  std::vector<Eigen::Vector3f> colors;
  std::vector<float> confidences;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }

  void append(const PointCloud& other);
  void validate() const;
};

PointCloud transform(const PointCloud& cloud, const Similarity& sim);

struct ChamferOptions {
  /// Clouds up to this size use exhaustive search; larger ones use a uniform
  /// hash grid that returns the same nearest neighbors.
  std::size_t brute_force_limit = 10000;
};

/// For every query point, Euclidean distance to its nearest neighbor in `reference`.
std::vector<double> nearest_distances(const std::vector<Eigen::Vector3f>& queries,
                                      const std::vector<Eigen::Vector3f>& reference,
                                      const ChamferOptions& options = {});

/// 0.5 * mean_a min_b |a-b| + 0.5 * mean_b min_a |a-b|.
double chamfer_distance(const PointCloud& a, const PointCloud& b, const ChamferOptions& options = {});

/// Binary little-endian PLY with vertex properties x y z (float),
/// red green blue (uchar) and confidence (float). Missing colors are written
/// as white and missing confidences as 1.
void write_ply(std::ostream& out, const PointCloud& cloud);
std::string to_ply_bytes(const PointCloud& cloud);
void save_ply(const std::string& path, const PointCloud& cloud);

PointCloud read_ply(std::istream& in);
PointCloud from_ply_bytes(const std::string& bytes);
PointCloud load_ply(const std::string& path);

}  // namespace rng::geometry
