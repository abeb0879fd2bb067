// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/evaluation/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "rng/common/error.hpp"

namespace rng::evaluation {

namespace {

constexpr double kRadToDeg = 180.0 / 3.14159265358979323846;
// Angles within this many degrees of a threshold count as on it, so that
// exact constructions are not split by rounding.
constexpr double kThresholdSlack = 1e-9;

bool below(double error, double threshold) { return error < threshold - kThresholdSlack; }

struct Relative {
  Eigen::Matrix3d rotation;
  Eigen::Vector3d translation;
};

Relative relative(const geometry::CameraPose& i, const geometry::CameraPose& j) {
  const Eigen::Matrix3d rjt = j.rotation.transpose();
  return {rjt * i.rotation, rjt * (i.center - j.center)};
}

}  // namespace

double geodesic_deg(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * axis.norm(), 0.5 * (r.trace() - 1.0)) * kRadToDeg;
}

std::vector<PairError> relative_pose_errors(std::span<const geometry::CameraPose> pred,
                                            std::span<const geometry::CameraPose> gt) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "pose sets differ in size");
  require(pred.size() >= 2, ErrorCode::kInvalidArgument, "pose metrics need at least two views");
  std::vector<PairError> out;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      if (i == j) continue;
      const auto p = relative(pred[i], pred[j]);
      const auto g = relative(gt[i], gt[j]);
      out.push_back({geodesic_deg(g.rotation.transpose() * p.rotation),
                     geometry::angle_between_deg(p.translation, g.translation)});
    }
  }
  return out;
}

PoseMetrics pose_metrics(std::span<const PairError> errors, const PoseThresholds& thresholds) {
  require(!errors.empty(), ErrorCode::kEmptyInput, "no pose pairs");
  require(thresholds.auc_max_deg >= 1, ErrorCode::kInvalidArgument, "auc_max_deg must be positive");
  const double n = static_cast<double>(errors.size());
  PoseMetrics m;
  for (const auto& e : errors) {
    if (below(e.rotation_deg, thresholds.rotation_deg)) m.ra += 1.0;
    if (below(e.translation_deg, thresholds.translation_deg)) m.rt += 1.0;
  }
  m.ra *= 100.0 / n;
  m.rt *= 100.0 / n;
  for (int tau = 1; tau <= thresholds.auc_max_deg; ++tau) {
    double hit = 0.0;
    for (const auto& e : errors) {
      if (below(std::max(e.rotation_deg, e.translation_deg), tau)) hit += 1.0;
    }
    m.auc += 100.0 * hit / n;
  }
  m.auc /= thresholds.auc_max_deg;
  return m;
}

PoseMetrics pose_metrics(std::span<const geometry::CameraPose> pred, std::span<const geometry::CameraPose> gt,
                         const PoseThresholds& thresholds) {
  const auto errors = relative_pose_errors(pred, gt);
  return pose_metrics(errors, thresholds);
}

DepthMetrics depth_metrics(const ImageF& pred, const ImageF& gt, const Mask& mask, double delta) {
  require(pred.same_shape(gt) && pred.channels == 1 && mask.height == gt.height && mask.width == gt.width,
          ErrorCode::kShapeMismatch, "depth maps and mask must share one H x W shape");
  double rel = 0.0, good = 0.0, n = 0.0;
  for (std::size_t i = 0; i < gt.pixels(); ++i) {
    if (mask.data[i] == 0) continue;
    const double d = gt.data[i];
    const double p = pred.data[i];
    require(d > 0.0, ErrorCode::kInvalidArgument, "masked ground-truth depth must be positive");
    rel += std::abs(p - d) / d;
    if (p > 0.0 && std::max(p / d, d / p) < delta) good += 1.0;
    n += 1.0;
  }
  require(n > 0.0, ErrorCode::kEmptyInput, "depth mask is empty");
  return {100.0 * rel / n, 100.0 * good / n};
}

double psnr(const ImageF& pred, const ImageF& gt) {
  require(pred.same_shape(gt) && !gt.empty(), ErrorCode::kShapeMismatch, "images differ in shape");
  double se = 0.0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const double d = static_cast<double>(pred.data[i]) - gt.data[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(gt.data.size());
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  double sum = 0.0;
  const double c = (size - 1) / 2.0;
  for (int i = 0; i < size; ++i) {
    w[static_cast<std::size_t>(i)] = std::exp(-(i - c) * (i - c) / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

namespace {

// Valid-mode separable filtering of one plane.
std::vector<double> filter_valid(const std::vector<double>& plane, int h, int w, const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow, 0.0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[static_cast<std::size_t>(t)] * plane[static_cast<std::size_t>(y) * w + x + t];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int t = 0; t < n; ++t) s += k[static_cast<std::size_t>(t)] * rows[static_cast<std::size_t>(y + t) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  }
  return out;
}

}  // namespace

double ssim(const ImageF& pred, const ImageF& gt) {
  require(pred.same_shape(gt) && !gt.empty(), ErrorCode::kShapeMismatch, "images differ in shape");
  const auto k = gaussian_window();
  const int n = static_cast<int>(k.size());
  require(gt.height >= n && gt.width >= n, ErrorCode::kInvalidArgument, "images smaller than the SSIM window");
  constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  const int h = gt.height, w = gt.width;
  double total = 0.0;
  for (int c = 0; c < gt.channels; ++c) {
    std::vector<double> x(gt.pixels()), y(gt.pixels()), xx(gt.pixels()), yy(gt.pixels()), xy(gt.pixels());
    for (std::size_t i = 0; i < gt.pixels(); ++i) {
      x[i] = pred.data[i * gt.channels + c];
      y[i] = gt.data[i * gt.channels + c];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
    const auto sxx = filter_valid(xx, h, w, k), syy = filter_valid(yy, h, w, k), sxy = filter_valid(xy, h, w, k);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cov = sxy[i] - mx[i] * my[i];
      sum += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / gt.channels;
}

ImageMetrics image_metrics(const ImageF& pred, const ImageF& gt) { return {psnr(pred, gt), ssim(pred, gt)}; }

}  // namespace rng::evaluation
