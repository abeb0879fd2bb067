// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/losses/losses.hpp"

#include <cmath>
#include <random>

#include "rng/common/error.hpp"

namespace rng::losses {

void LossWeights::validate() const {
  require(pmap >= 0 && camera >= 0 && perceptual >= 0 && alpha >= 0, ErrorCode::kInvalidArgument,
          "loss weights must be non-negative");
  require(huber_eps > 0, ErrorCode::kInvalidArgument, "huber epsilon must be positive");
}

nlohmann::json LossWeights::to_json() const {
  return {{"pmap", pmap},   {"camera", camera},       {"perceptual", perceptual},
          {"alpha", alpha}, {"huber_eps", huber_eps}, {"feature_seed", feature_seed}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  require(j.is_object(), ErrorCode::kInvalidArgument, "loss weights must be a JSON object");
  LossWeights w;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "pmap") w.pmap = value.get<double>();
      else if (key == "camera") w.camera = value.get<double>();
      else if (key == "perceptual") w.perceptual = value.get<double>();
      else if (key == "alpha") w.alpha = value.get<double>();
      else if (key == "huber_eps") w.huber_eps = value.get<double>();
      else if (key == "feature_seed") w.feature_seed = value.get<std::uint64_t>();
      else fail(ErrorCode::kInvalidArgument, "unknown loss weight '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("loss weights: ") + e.what());
  }
  w.validate();
  return w;
}

nlohmann::json LossReport::to_json() const {
  return {{"total", total}, {"rgb_mse", rgb_mse}, {"rgb_perceptual", rgb_perceptual}, {"pmap", pmap}, {"cam", cam}};
}

PerceptualBank::PerceptualBank(std::uint64_t seed, int channels) : channels_(channels) {
  require(channels > 0, ErrorCode::kInvalidArgument, "perceptual bank needs at least one channel");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.5 / std::sqrt(27.0));
  for (int s = 0; s < kScales; ++s) {
    Matd w(27, channels);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = normal(rng);
    weights_.push_back(std::move(w));
  }
}

namespace {

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

Matd conv_forward(const Matd& img, int h, int w, const Matd& k) {
  Matd out = Matd::Zero(static_cast<Eigen::Index>(h) * w, k.cols());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto row = out.row(y * w + x);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int src = clampi(y + dy, 0, h - 1) * w + clampi(x + dx, 0, w - 1);
          const int tap = (dy + 1) * 3 + (dx + 1);
          row.noalias() += img.row(src) * k.middleRows(tap * 3, 3);
        }
      }
    }
  }
  return out;
}

Matd conv_backward_input(const Matd& dout, int h, int w, const Matd& k) {
  Matd din = Matd::Zero(static_cast<Eigen::Index>(h) * w, 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto drow = dout.row(y * w + x);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int src = clampi(y + dy, 0, h - 1) * w + clampi(x + dx, 0, w - 1);
          const int tap = (dy + 1) * 3 + (dx + 1);
          din.row(src).noalias() += drow * k.middleRows(tap * 3, 3).transpose();
        }
      }
    }
  }
  return din;
}

Matd avg_pool2(const Matd& img, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  Matd out(static_cast<Eigen::Index>(oh) * ow, img.cols());
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      out.row(y * ow + x) = 0.25 * (img.row(2 * y * w + 2 * x) + img.row(2 * y * w + 2 * x + 1) +
                                    img.row((2 * y + 1) * w + 2 * x) + img.row((2 * y + 1) * w + 2 * x + 1));
    }
  }
  return out;
}

Matd avg_pool2_backward(const Matd& dout, int h, int w) {
  const int oh = h / 2, ow = w / 2;
  Matd din = Matd::Zero(static_cast<Eigen::Index>(h) * w, dout.cols());
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const auto g = 0.25 * dout.row(y * ow + x);
      din.row(2 * y * w + 2 * x) += g;
      din.row(2 * y * w + 2 * x + 1) += g;
      din.row((2 * y + 1) * w + 2 * x) += g;
      din.row((2 * y + 1) * w + 2 * x + 1) += g;
    }
  }
  return din;
}

void check_rows(const Matd& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  require(m.rows() == rows && m.cols() == cols, ErrorCode::kShapeMismatch,
          std::string(what) + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) +
              ", expected " + std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace

RgbTerms rgb_loss(const Matd& pred, const Matd& gt, int height, int width, const PerceptualBank& bank,
                  bool with_grad) {
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  require(height > 0 && width > 0, ErrorCode::kShapeMismatch, "empty image");
  check_rows(pred, n, 3, "predicted image");
  check_rows(gt, n, 3, "target image");
  const int levels = PerceptualBank::kScales;
  require(height % (1 << (levels - 1)) == 0 && width % (1 << (levels - 1)) == 0, ErrorCode::kShapeMismatch,
          "image size must be divisible by 4 for the perceptual pyramid");

  RgbTerms out;
  const Matd diff = pred - gt;
  out.mse = diff.squaredNorm() / static_cast<double>(diff.size());
  if (with_grad) out.grad_mse = diff * (2.0 / static_cast<double>(diff.size()));

  // Features of (2x - 1) so the bank sees zero-centered colors.
  Matd p = (pred.array() * 2.0 - 1.0).matrix();
  Matd q = (gt.array() * 2.0 - 1.0).matrix();
  std::vector<Matd> dfeat_in(levels);
  std::vector<std::pair<int, int>> dims;
  std::vector<Matd> fp_all;
  int h = height, w = width;
  for (int s = 0; s < levels; ++s) {
    if (s > 0) {
      p = avg_pool2(p, h, w);
      q = avg_pool2(q, h, w);
      h /= 2;
      w /= 2;
    }
    dims.emplace_back(h, w);
    const Matd fp = conv_forward(p, h, w, bank.weights(s)).array().tanh().matrix();
    const Matd fq = conv_forward(q, h, w, bank.weights(s)).array().tanh().matrix();
    const Matd d = fp - fq;
    const double count = static_cast<double>(d.size());
    out.perceptual += d.cwiseAbs().sum() / count / levels;
    if (with_grad) {
      const Matd dfeat = d.unaryExpr([](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }) / (count * levels);
      const Matd dpre = (dfeat.array() * (1.0 - fp.array().square())).matrix();
      dfeat_in[static_cast<std::size_t>(s)] = conv_backward_input(dpre, h, w, bank.weights(s));
    }
  }
  if (with_grad) {
    Matd acc = dfeat_in[levels - 1];
    for (int s = levels - 1; s > 0; --s) {
      const auto [fh, fw] = dims[static_cast<std::size_t>(s - 1)];
      acc = avg_pool2_backward(acc, fh, fw) + dfeat_in[static_cast<std::size_t>(s - 1)];
    }
    out.grad_perceptual = acc * 2.0;
  }
  return out;
}

PointmapTerms pointmap_loss(const Matd& pred, const Matd& gt, const Matd& conf, std::span<const unsigned char> mask,
                            int height, int width, double alpha, bool with_grad) {
  const Eigen::Index n = static_cast<Eigen::Index>(height) * width;
  check_rows(pred, n, 3, "predicted point map");
  check_rows(gt, n, 3, "target point map");
  check_rows(conf, n, 1, "confidence map");
  require(static_cast<Eigen::Index>(mask.size()) == n, ErrorCode::kShapeMismatch, "mask size mismatch");
  PointmapTerms out;
  if (with_grad) {
    out.grad_pred = Matd::Zero(n, 3);
    out.grad_conf = Matd::Zero(n, 1);
  }
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < n; ++i) count += mask[static_cast<std::size_t>(i)] ? 1 : 0;
  if (count == 0) return out;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (mask[static_cast<std::size_t>(i)]) {
      require(std::isfinite(conf(i, 0)), ErrorCode::kNonFinite, "confidence is not finite");
      require(conf(i, 0) > 0.0, ErrorCode::kInvalidArgument, "confidence must be positive");
    }
  }
  const Matd r = pred - gt;
  const double inv = 1.0 / static_cast<double>(count);
  auto unit = [](const Eigen::Matrix<double, 1, 3>& v, double norm) {
    return norm > 0.0 ? Eigen::Matrix<double, 1, 3>(v / norm) : Eigen::Matrix<double, 1, 3>::Zero();
  };
  double total = 0.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * width + x;
      if (!mask[static_cast<std::size_t>(i)]) continue;
      const double c = conf(i, 0);
      const Eigen::Matrix<double, 1, 3> ri = r.row(i);
      const double nr = ri.norm();
      double residual = nr;
      if (with_grad) out.grad_pred.row(i) += inv * c * unit(ri, nr);
      const Eigen::Index neighbors[2] = {x + 1 < width ? i + 1 : -1, y + 1 < height ? i + width : -1};
      for (Eigen::Index j : neighbors) {
        if (j < 0 || !mask[static_cast<std::size_t>(j)]) continue;
        const Eigen::Matrix<double, 1, 3> dr = r.row(j) - ri;
        const double nd = dr.norm();
        residual += nd;
        if (with_grad) {
          const auto u = unit(dr, nd);
          out.grad_pred.row(j) += inv * c * u;
          out.grad_pred.row(i) -= inv * c * u;
        }
      }
      total += c * residual - alpha * std::log(c);
      if (with_grad) out.grad_conf(i, 0) = inv * (residual - alpha / c);
    }
  }
  out.value = total * inv;
  return out;
}

double huber(double r, double eps) {
  const double a = std::abs(r);
  return a <= eps ? 0.5 * r * r / eps : a - 0.5 * eps;
}

double huber_grad(double r, double eps) {
  if (std::abs(r) <= eps) return r / eps;
  return r > 0 ? 1.0 : -1.0;
}

Eigen::Matrix<double, 1, 9> pose_vector(const geometry::CameraPose& pose) {
  Eigen::Matrix<double, 1, 9> v;
  v << pose.rotation.col(0).transpose(), pose.rotation.col(1).transpose(), pose.center.transpose();
  return v;
}

CameraTerms camera_loss(const Matd& pred_raw, std::span<const geometry::CameraPose> gt, double eps, bool with_grad) {
  require(pred_raw.rows() == static_cast<Eigen::Index>(gt.size()), ErrorCode::kShapeMismatch,
          "camera loss: " + std::to_string(pred_raw.rows()) + " predictions for " + std::to_string(gt.size()) +
              " ground-truth poses");
  require(pred_raw.cols() == 9, ErrorCode::kShapeMismatch, "camera predictions must have 9 columns");
  CameraTerms out;
  if (with_grad) out.grad = Matd::Zero(pred_raw.rows(), 9);
  for (Eigen::Index v = 0; v < pred_raw.rows(); ++v) {
    const auto target = pose_vector(gt[static_cast<std::size_t>(v)]);
    for (int k = 0; k < 9; ++k) {
      const double r = target(k) - pred_raw(v, k);
      out.value += huber(r, eps) / 9.0;
      if (with_grad) out.grad(v, k) = -huber_grad(r, eps) / 9.0;
    }
  }
  return out;
}

double camera_loss(std::span<const geometry::CameraPose> pred, std::span<const geometry::CameraPose> gt, double eps) {
  Matd raw(static_cast<Eigen::Index>(pred.size()), 9);
  for (std::size_t i = 0; i < pred.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = pose_vector(pred[i]);
  return camera_loss(raw, gt, eps, false).value;
}

Matd image_rows(const ImageF& image) {
  Matd m(static_cast<Eigen::Index>(image.pixels()), image.channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = image.data[static_cast<std::size_t>(i)];
  return m;
}

LossReport total_loss(const Matd& rgb, const Matd& xyz, const Matd& confidence, const Matd& camera_raw,
                      const scenegen::TrainingExample& example, const LossWeights& w, const PerceptualBank& bank,
                      LossGradients* grads) {
  w.validate();
  require(example.sources != nullptr, ErrorCode::kInvalidArgument, "training example without sources");
  const auto& t = example.target;
  const bool g = grads != nullptr;
  const auto rgb_terms = rgb_loss(rgb, image_rows(t.rgb), t.rgb.height, t.rgb.width, bank, g);
  const auto pm = pointmap_loss(xyz, image_rows(t.pointmap), confidence, t.mask.data, t.rgb.height, t.rgb.width,
                                w.alpha, g);
  std::vector<geometry::CameraPose> gt_poses;
  for (const auto& s : *example.sources) gt_poses.push_back(s.pose);
  const auto cam = camera_loss(camera_raw, gt_poses, w.huber_eps, g);

  LossReport report;
  report.rgb_mse = rgb_terms.mse;
  report.rgb_perceptual = rgb_terms.perceptual;
  report.pmap = pm.value;
  report.cam = cam.value;
  report.total = report.rgb_mse + w.perceptual * report.rgb_perceptual + w.pmap * report.pmap + w.camera * report.cam;
  require(std::isfinite(report.total), ErrorCode::kNonFinite, "loss is not finite: " + report.to_json().dump());
  if (g) {
    grads->rgb = rgb_terms.grad_mse + w.perceptual * rgb_terms.grad_perceptual;
    grads->xyz = w.pmap * pm.grad_pred;
    grads->confidence = w.pmap * pm.grad_conf;
    grads->camera = w.camera * cam.grad;
  }
  return report;
}

LossReport total_loss(const model::ModelOutputs& outputs, const scenegen::TrainingExample& example,
                      const LossWeights& w, const PerceptualBank& bank) {
  require(outputs.targets.size() == 1, ErrorCode::kShapeMismatch, "expected exactly one target output");
  const auto& m = outputs.targets.front();
  Matd raw(static_cast<Eigen::Index>(outputs.poses.size()), 9);
  for (std::size_t i = 0; i < outputs.poses.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = pose_vector(outputs.poses[i]);
  return total_loss(image_rows(m.rgb), image_rows(m.pointmap), image_rows(m.confidence), raw, example, w, bank);
}

}  // namespace rng::losses
