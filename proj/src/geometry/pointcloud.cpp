// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/geometry/pointcloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "rng/common/error.hpp"

namespace rng::geometry {

static_assert(std::endian::native == std::endian::little, "PLY writer assumes a little-endian host");

void PointCloud::append(const PointCloud& other) {
  const bool had_colors = !colors.empty() || points.empty();
  const bool had_conf = !confidences.empty() || points.empty();
  points.insert(points.end(), other.points.begin(), other.points.end());
  if (had_colors && !other.colors.empty()) {
    colors.insert(colors.end(), other.colors.begin(), other.colors.end());
  } else {
    colors.clear();
  }
  if (had_conf && !other.confidences.empty()) {
    confidences.insert(confidences.end(), other.confidences.begin(), other.confidences.end());
  } else {
    confidences.clear();
  }
}

void PointCloud::validate() const {
  require(colors.empty() || colors.size() == points.size(), ErrorCode::kShapeMismatch,
          "point cloud colors do not match point count");
  require(confidences.empty() || confidences.size() == points.size(), ErrorCode::kShapeMismatch,
          "point cloud confidences do not match point count");
  for (const auto& p : points) {
    require(p.allFinite(), ErrorCode::kNonFinite, "point cloud contains a non-finite point");
  }
  for (const auto& c : colors) {
    require(c.minCoeff() >= 0.0f && c.maxCoeff() <= 1.0f, ErrorCode::kInvalidArgument,
            "point cloud color outside [0,1]");
  }
}

PointCloud transform(const PointCloud& cloud, const Similarity& sim) {
  PointCloud out = cloud;
  for (auto& p : out.points) p = sim.apply(p.cast<double>()).cast<float>();
  return out;
}

namespace {

double squared(const Eigen::Vector3f& a, const Eigen::Vector3f& b) {
  const double dx = static_cast<double>(a.x()) - b.x();
  const double dy = static_cast<double>(a.y()) - b.y();
  const double dz = static_cast<double>(a.z()) - b.z();
  return dx * dx + dy * dy + dz * dz;
}

std::vector<double> brute_force(const std::vector<Eigen::Vector3f>& queries,
                                const std::vector<Eigen::Vector3f>& reference) {
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& r : reference) best = std::min(best, squared(queries[i], r));
    out[i] = std::sqrt(best);
  }
  return out;
}

class HashGrid {
 public:
  explicit HashGrid(const std::vector<Eigen::Vector3f>& points) : points_(points) {
    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (const auto& p : points) {
      lo = lo.cwiseMin(p.cast<double>());
      hi = hi.cwiseMax(p.cast<double>());
    }
    const Eigen::Vector3d extent = (hi - lo).cwiseMax(1e-9);
    // About two points per occupied cell for surface-like clouds.
    const double area_like = extent.x() * extent.y() + extent.y() * extent.z() + extent.x() * extent.z();
    cell_ = std::max(std::sqrt(2.0 * area_like / static_cast<double>(points.size())), 1e-9);
    origin_ = lo;
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(extent[a] / cell_) + 1;
    for (std::size_t i = 0; i < points.size(); ++i) {
      cells_[key(clamp_cell(cell_of(points[i].cast<double>())))].push_back(static_cast<std::uint32_t>(i));
    }
  }

  double nearest(const Eigen::Vector3f& q) const {
    const Eigen::Vector3i c = cell_of(q.cast<double>());
    int last_ring = 0;
    for (int a = 0; a < 3; ++a) last_ring = std::max({last_ring, std::abs(c[a]), std::abs(c[a] - dims_[a] + 1)});
    double best = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= last_ring; ++ring) {
      visit_ring(c, ring, [&](std::uint32_t idx) { best = std::min(best, squared(q, points_[idx])); });
      // Any point outside rings 0..ring is farther than ring * cell.
      const double covered = ring * cell_;
      if (best <= covered * covered) break;
    }
    return std::sqrt(best);
  }

 private:
  Eigen::Vector3i cell_of(const Eigen::Vector3d& p) const {
    return ((p - origin_) / cell_).array().floor().cast<int>();
  }
  Eigen::Vector3i clamp_cell(Eigen::Vector3i c) const {
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(c[a], 0, dims_[a] - 1);
    return c;
  }
  static std::uint64_t key(const Eigen::Vector3i& c) {
    return (static_cast<std::uint64_t>(c.x()) << 42) | (static_cast<std::uint64_t>(c.y()) << 21) |
           static_cast<std::uint64_t>(c.z());
  }
  // Visits the occupied cells on the surface of the cube of half-width `ring`
  // around `c`, clipped to the grid box.
  template <typename F>
  void visit_ring(const Eigen::Vector3i& c, int ring, F&& fn) const {
    const auto lo = [&](int a) { return std::max(c[a] - ring, 0); };
    const auto hi = [&](int a) { return std::min(c[a] + ring, dims_[a] - 1); };
    const auto visit = [&](int x, int y, int z) {
      const auto it = cells_.find(key(Eigen::Vector3i(x, y, z)));
      if (it == cells_.end()) return;
      for (auto idx : it->second) fn(idx);
    };
    for (int x = lo(0); x <= hi(0); ++x) {
      for (int y = lo(1); y <= hi(1); ++y) {
        if (std::abs(x - c.x()) == ring || std::abs(y - c.y()) == ring) {
          for (int z = lo(2); z <= hi(2); ++z) visit(x, y, z);
        } else {
          if (c.z() - ring >= 0 && c.z() - ring < dims_[2]) visit(x, y, c.z() - ring);
          if (ring > 0 && c.z() + ring >= 0 && c.z() + ring < dims_[2]) visit(x, y, c.z() + ring);
        }
      }
    }
  }

  const std::vector<Eigen::Vector3f>& points_;
  Eigen::Vector3d origin_;
  double cell_ = 1.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Ones();
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace

std::vector<double> nearest_distances(const std::vector<Eigen::Vector3f>& queries,
                                      const std::vector<Eigen::Vector3f>& reference,
                                      const ChamferOptions& options) {
  require(!reference.empty(), ErrorCode::kEmptyInput, "nearest neighbor reference cloud is empty");
  if (reference.size() <= options.brute_force_limit && queries.size() <= options.brute_force_limit) {
    return brute_force(queries, reference);
  }
  const HashGrid grid(reference);
  std::vector<double> out(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) out[i] = grid.nearest(queries[i]);
  return out;
}

double chamfer_distance(const PointCloud& a, const PointCloud& b, const ChamferOptions& options) {
  require(!a.empty() && !b.empty(), ErrorCode::kEmptyInput, "chamfer distance of an empty cloud");
  const auto ab = nearest_distances(a.points, b.points, options);
  const auto ba = nearest_distances(b.points, a.points, options);
  double sum_ab = 0.0;
  for (double d : ab) sum_ab += d;
  double sum_ba = 0.0;
  for (double d : ba) sum_ba += d;
  return 0.5 * sum_ab / static_cast<double>(ab.size()) + 0.5 * sum_ba / static_cast<double>(ba.size());
}

namespace {

constexpr std::size_t kVertexBytes = 3 * 4 + 3 + 4;

std::uint8_t to_byte(float c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
}

}  // namespace

void write_ply(std::ostream& out, const PointCloud& cloud) {
  cloud.validate();
  out << "ply\nformat binary_little_endian 1.0\n"
      << "element vertex " << cloud.size() << "\n"
      << "property float x\nproperty float y\nproperty float z\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "property float confidence\nend_header\n";
  std::string buffer(cloud.size() * kVertexBytes, '\0');
  char* dst = buffer.data();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    std::memcpy(dst, cloud.points[i].data(), 12);
    dst += 12;
    const Eigen::Vector3f color = cloud.colors.empty() ? Eigen::Vector3f::Ones() : cloud.colors[i];
    for (int c = 0; c < 3; ++c) *dst++ = static_cast<char>(to_byte(color[c]));
    const float conf = cloud.confidences.empty() ? 1.0f : cloud.confidences[i];
    std::memcpy(dst, &conf, 4);
    dst += 4;
  }
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "failed writing PLY data");
}

std::string to_ply_bytes(const PointCloud& cloud) {
  std::ostringstream os(std::ios::binary);
  write_ply(os, cloud);
  return os.str();
}

void save_ply(const std::string& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot open " + path + " for writing");
  write_ply(out, cloud);
}

PointCloud read_ply(std::istream& in) {
  std::string line;
  std::getline(in, line);
  require(line == "ply", ErrorCode::kCorruptFile, "not a PLY file");
  std::size_t count = 0;
  bool binary_le = false;
  std::vector<std::string> properties;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      properties.push_back(type + " " + name);
    }
  }
  require(binary_le, ErrorCode::kCorruptFile, "only binary_little_endian PLY is supported");
  const std::vector<std::string> expected = {"float x", "float y", "float z", "uchar red",
                                             "uchar green", "uchar blue", "float confidence"};
  require(properties == expected, ErrorCode::kCorruptFile, "unexpected PLY vertex layout");

  std::string buffer(count * kVertexBytes, '\0');
  in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
  require(static_cast<std::size_t>(in.gcount()) == buffer.size(), ErrorCode::kCorruptFile,
          "truncated PLY vertex data");

  PointCloud cloud;
  cloud.points.resize(count);
  cloud.colors.resize(count);
  cloud.confidences.resize(count);
  const char* src = buffer.data();
  for (std::size_t i = 0; i < count; ++i) {
    std::memcpy(cloud.points[i].data(), src, 12);
    src += 12;
    for (int c = 0; c < 3; ++c) cloud.colors[i][c] = static_cast<std::uint8_t>(*src++) / 255.0f;
    std::memcpy(&cloud.confidences[i], src, 4);
    src += 4;
  }
  return cloud;
}

PointCloud from_ply_bytes(const std::string& bytes) {
  std::istringstream is(bytes, std::ios::binary);
  return read_ply(is);
}

PointCloud load_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + path);
  return read_ply(in);
}

}  // namespace rng::geometry
