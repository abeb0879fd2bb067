// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"
#include "rng/geometry/camera.hpp"
#include "rng/model/model.hpp"
#include "rng/nn/graph.hpp"
#include "rng/scenegen/dataset.hpp"

namespace rng::losses {

using Matd = nn::Mat<double>;

struct LossWeights {
  double pmap = 0.2;        // lambda_pmap
  double camera = 1.0;      // lambda_c
  double perceptual = 0.5;  // lambda_p
  double alpha = 0.2;       // confidence regularizer
  double huber_eps = 0.1;
  /// Seed of the frozen perceptual feature bank.
  std::uint64_t feature_seed = 7;

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
  bool operator==(const LossWeights&) const = default;
};

struct LossReport {
  double total = 0.0;
  double rgb_mse = 0.0;
  double rgb_perceptual = 0.0;
  double pmap = 0.0;
  double cam = 0.0;

  nlohmann::json to_json() const;
  bool operator==(const LossReport&) const = default;
};

/// Frozen random 3x3 convolution banks applied at three scales (full, 1/2,
/// 1/4 by 2x2 average pooling), each followed by tanh.
class PerceptualBank {
 public:
  static constexpr int kScales = 3;
  explicit PerceptualBank(std::uint64_t seed, int channels = 8);

  int channels() const { return channels_; }
  /// Weights of scale s: (27 x channels), rows ordered (dy, dx, cin).
  const Matd& weights(int scale) const { return weights_[static_cast<std::size_t>(scale)]; }

 private:
  int channels_;
  std::vector<Matd> weights_;
};

/// Images are (H*W x 3) pixel rows in raster order.
struct RgbTerms {
  double mse = 0.0;
  double perceptual = 0.0;
  Matd grad_mse;
  Matd grad_perceptual;
};
RgbTerms rgb_loss(const Matd& pred, const Matd& gt, int height, int width, const PerceptualBank& bank,
                  bool with_grad = true);

struct PointmapTerms {
  double value = 0.0;
  Matd grad_pred;  // H*W x 3
  Matd grad_conf;  // H*W x 1
};
/// Mean over foreground pixels of
///   conf * (|r| + |r(x+1) - r| + |r(y+1) - r|) - alpha * log(conf)
/// with r = pred - gt; a difference term counts only when both pixels are
/// foreground. Throws kInvalidArgument on non-positive confidence.
PointmapTerms pointmap_loss(const Matd& pred, const Matd& gt, const Matd& conf, std::span<const unsigned char> mask,
                            int height, int width, double alpha, bool with_grad = true);

/// Elementwise Huber: r^2 / (2 eps) for |r| <= eps, |r| - eps / 2 beyond.
double huber(double r, double eps);
double huber_grad(double r, double eps);

/// 9-vector of a pose: the first two rotation columns, then the center.
Eigen::Matrix<double, 1, 9> pose_vector(const geometry::CameraPose& pose);

struct CameraTerms {
  double value = 0.0;
  Matd grad;  // views x 9
};
/// Sum over views of the mean Huber loss of (gt 9-vector - predicted row).
CameraTerms camera_loss(const Matd& pred_raw, std::span<const geometry::CameraPose> gt, double eps,
                        bool with_grad = true);
double camera_loss(std::span<const geometry::CameraPose> pred, std::span<const geometry::CameraPose> gt, double eps);

/// Gradients of LossReport::total with respect to the head outputs.
struct LossGradients {
  Matd rgb;
  Matd xyz;
  Matd confidence;
  Matd camera;
};

/// Full objective of one example: total = mse + lambda_p * perceptual +
/// lambda_pmap * pmap + lambda_c * cam. Background target pixels count for
/// the color terms only.
LossReport total_loss(const Matd& rgb, const Matd& xyz, const Matd& confidence, const Matd& camera_raw,
                      const scenegen::TrainingExample& example, const LossWeights& w, const PerceptualBank& bank,
                      LossGradients* grads = nullptr);
/// Same objective evaluated on decoded outputs; the camera term uses the
/// orthonormalized predicted poses.
LossReport total_loss(const model::ModelOutputs& outputs, const scenegen::TrainingExample& example,
                      const LossWeights& w, const PerceptualBank& bank);

/// Pixel rows (H*W x C) of an image.
Matd image_rows(const ImageF& image);

}  // namespace rng::losses
