#include <doctest.h>

#include <cmath>
#include <random>

#include "rng/common/error.hpp"
#include "rng/losses/losses.hpp"
#include "support/oracles.hpp"

using namespace rng;
using namespace rng::losses;
using oracle::fd_rel_error;

namespace {

Matd uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

std::vector<unsigned char> random_mask(int n, std::mt19937_64& rng, double p = 0.7) {
  std::bernoulli_distribution b(p);
  std::vector<unsigned char> m(static_cast<std::size_t>(n));
  for (auto& v : m) v = b(rng) ? 1 : 0;
  return m;
}

// Direct per-pixel evaluation of the confidence-weighted point-map loss.
double pointmap_reference(const Matd& pred, const Matd& gt, const Matd& conf, const std::vector<unsigned char>& mask,
                          int h, int w, double alpha) {
  auto res = [&](int y, int x) { return Eigen::Vector3d((pred.row(y * w + x) - gt.row(y * w + x)).transpose()); };
  auto fg = [&](int y, int x) { return y < h && x < w && mask[static_cast<std::size_t>(y * w + x)] != 0; };
  double sum = 0.0;
  int n = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!fg(y, x)) continue;
      ++n;
      double term = res(y, x).norm();
      if (fg(y, x + 1)) term += (res(y, x + 1) - res(y, x)).norm();
      if (fg(y + 1, x)) term += (res(y + 1, x) - res(y, x)).norm();
      const double c = conf(y * w + x, 0);
      sum += c * term - alpha * std::log(c);
    }
  }
  return n ? sum / n : 0.0;
}

double scalar_huber(double r, double eps) {
  if (r < 0) r = -r;
  if (r > eps) return r - eps / 2;
  return r * r / eps / 2;
}

geometry::CameraPose random_pose(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  geometry::CameraPose p;
  p.rotation = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
  p.center = Eigen::Vector3d(n(rng), n(rng), n(rng));
  p.intrinsics = geometry::default_intrinsics(8, 8);
  p.width = p.height = 8;
  return p;
}

}  // namespace

TEST_CASE("loss weights defaults and JSON") {
  LossWeights w;
  CHECK(w.pmap == 0.2);
  CHECK(w.camera == 1.0);
  CHECK(w.perceptual == 0.5);
  CHECK(w.alpha == 0.2);
  CHECK(w.huber_eps == 0.1);
  CHECK(LossWeights::from_json(w.to_json()) == w);
  CHECK_THROWS_AS(LossWeights::from_json({{"pmap", -1.0}}), Error);
  CHECK_THROWS_AS(LossWeights::from_json({{"lambda", 1.0}}), Error);
}

TEST_CASE("rgb loss closed forms") {
  std::mt19937_64 rng(1);
  const PerceptualBank bank(3);
  const Matd gt = uniform(64, 3, rng, 0.2, 0.7);
  const auto same = rgb_loss(gt, gt, 8, 8, bank);
  CHECK(same.mse == 0.0);
  CHECK(same.perceptual == 0.0);
  const Matd shifted = (gt.array() + 0.1).matrix();
  CHECK(rgb_loss(shifted, gt, 8, 8, bank).mse == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(rgb_loss(shifted, gt, 8, 8, bank).perceptual > 0.0);
}

TEST_CASE("rgb loss shape errors") {
  const PerceptualBank bank(3);
  std::mt19937_64 rng(2);
  const Matd a = uniform(64, 3, rng, 0, 1);
  const Matd b = uniform(63, 3, rng, 0, 1);
  CHECK_THROWS_AS(rgb_loss(a, b, 8, 8, bank), Error);
}

TEST_CASE("perceptual bank is deterministic in its seed") {
  CHECK(PerceptualBank(5).weights(2) == PerceptualBank(5).weights(2));
  CHECK(PerceptualBank(5).weights(0) != PerceptualBank(6).weights(0));
  std::mt19937_64 rng(3);
  const Matd a = uniform(256, 3, rng, 0, 1);
  const Matd b = uniform(256, 3, rng, 0, 1);
  CHECK(rgb_loss(a, b, 16, 16, PerceptualBank(5)).perceptual == rgb_loss(a, b, 16, 16, PerceptualBank(5)).perceptual);
}

TEST_CASE("rgb loss gradients match finite differences") {
  const PerceptualBank bank(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(100 + trial);
    const int h = 8, w = 12;
    const Matd pred = uniform(h * w, 3, rng, 0, 1);
    const Matd gt = uniform(h * w, 3, rng, 0, 1);
    const auto terms = rgb_loss(pred, gt, h, w, bank);
    CHECK(fd_rel_error([&](const Matd& p) { return rgb_loss(p, gt, h, w, bank, false).mse; }, pred, terms.grad_mse) <=
          1e-3);
    CHECK(fd_rel_error([&](const Matd& p) { return rgb_loss(p, gt, h, w, bank, false).perceptual; }, pred,
                       terms.grad_perceptual) <= 1e-3);
  }
}

TEST_CASE("pointmap loss closed forms and reference") {
  std::mt19937_64 rng(4);
  const int h = 6, w = 7, n = h * w;
  const Matd gt = uniform(n, 3, rng, -1, 1);
  std::vector<unsigned char> all(static_cast<std::size_t>(n), 1);
  const Matd ones = Matd::Ones(n, 1);
  CHECK(pointmap_loss(gt, gt, ones, all, h, w, 0.2).value == 0.0);
  const Matd e = Matd::Constant(n, 1, std::exp(1.0));
  CHECK(pointmap_loss(gt, gt, e, all, h, w, 0.2).value == doctest::Approx(-0.2).epsilon(1e-12));

  for (int trial = 0; trial < 5; ++trial) {
    const Matd pred = uniform(n, 3, rng, -1, 1);
    const Matd conf = uniform(n, 1, rng, 0.5, 2.0);
    const auto mask = random_mask(n, rng);
    CHECK(pointmap_loss(pred, gt, conf, mask, h, w, 0.2).value ==
          doctest::Approx(pointmap_reference(pred, gt, conf, mask, h, w, 0.2)).epsilon(1e-12));
  }

  std::vector<unsigned char> none(static_cast<std::size_t>(n), 0);
  CHECK(pointmap_loss(gt, gt, ones, none, h, w, 0.2).value == 0.0);

  Matd bad = ones;
  bad(5, 0) = 0.0;
  CHECK_THROWS_AS(pointmap_loss(gt, gt, bad, all, h, w, 0.2), Error);
}

TEST_CASE("pointmap loss gradients match finite differences") {
  for (int trial = 0; trial < 10; ++trial) {
    std::mt19937_64 rng(200 + trial);
    const int h = 5, w = 6, n = h * w;
    const Matd pred = uniform(n, 3, rng, -1, 1);
    const Matd gt = uniform(n, 3, rng, -1, 1);
    const Matd conf = uniform(n, 1, rng, 0.5, 3.0);
    const auto mask = random_mask(n, rng);
    const auto terms = pointmap_loss(pred, gt, conf, mask, h, w, 0.2);
    CHECK(fd_rel_error([&](const Matd& p) { return pointmap_loss(p, gt, conf, mask, h, w, 0.2, false).value; }, pred,
                       terms.grad_pred) <= 1e-3);
    CHECK(fd_rel_error([&](const Matd& c) { return pointmap_loss(pred, gt, c, mask, h, w, 0.2, false).value; }, conf,
                       terms.grad_conf) <= 1e-3);
  }
}

TEST_CASE("pointmap loss is minimized at sigma* = alpha / residual") {
  std::mt19937_64 rng(5);
  const int h = 4, w = 4, n = 16;
  const Matd pred = uniform(n, 3, rng, -1, 1);
  const Matd gt = uniform(n, 3, rng, -1, 1);
  std::vector<unsigned char> mask(16, 1);
  // Per-pixel residual a_i = |r_i| + forward-difference norms owned by pixel i.
  const Matd conf1 = Matd::Ones(n, 1);
  const auto base = pointmap_loss(pred, gt, conf1, mask, h, w, 0.2);
  // d/dconf_i = (a_i - alpha / conf_i) / n, so a_i = n * grad + alpha at conf = 1.
  const Eigen::Index pixel = 5;
  const double a = base.grad_conf(pixel, 0) * n + 0.2;
  const double star = 0.2 / a;
  double best = 1e300, best_sigma = 0;
  for (double s = 0.2 * star; s <= 5 * star; s *= 1.001) {
    Matd c = conf1;
    c(pixel, 0) = s;
    const double v = pointmap_loss(pred, gt, c, mask, h, w, 0.2, false).value;
    if (v < best) {
      best = v;
      best_sigma = s;
    }
  }
  CHECK(best_sigma == doctest::Approx(star).epsilon(2e-3));
  // At pred = gt the objective keeps decreasing with confidence.
  Matd lo = conf1, hi = conf1;
  hi(pixel, 0) = std::exp(8.0);
  CHECK(pointmap_loss(gt, gt, hi, mask, h, w, 0.2, false).value < pointmap_loss(gt, gt, lo, mask, h, w, 0.2, false).value);
}

TEST_CASE("huber closed form and camera loss reference") {
  CHECK(huber(0.05, 0.1) == doctest::Approx(0.5 * 0.05 * 0.05 / 0.1));
  CHECK(huber(-0.3, 0.1) == doctest::Approx(0.25));
  CHECK(huber(0.1, 0.1) == doctest::Approx(0.05));

  std::mt19937_64 rng(6);
  std::vector<geometry::CameraPose> gt;
  for (int i = 0; i < 4; ++i) gt.push_back(random_pose(rng));
  Matd same(4, 9);
  for (int i = 0; i < 4; ++i) same.row(i) = pose_vector(gt[static_cast<std::size_t>(i)]);
  CHECK(camera_loss(same, gt, 0.1).value == 0.0);
  CHECK(camera_loss(gt, gt, 0.1) == 0.0);

  // One element off by r <= eps.
  Matd one = same;
  one(2, 7) -= 0.04;
  CHECK(camera_loss(one, gt, 0.1).value == doctest::Approx(0.5 * 0.04 * 0.04 / 0.1 / 9.0).epsilon(1e-9));

  for (int trial = 0; trial < 10; ++trial) {
    const Matd pred = same + uniform(4, 9, rng, -0.5, 0.5);
    double ref = 0.0;
    for (int v = 0; v < 4; ++v) {
      for (int k = 0; k < 9; ++k) ref += scalar_huber(same(v, k) - pred(v, k), 0.1) / 9.0;
    }
    const auto terms = camera_loss(pred, gt, 0.1);
    CHECK(terms.value == doctest::Approx(ref).epsilon(1e-12));
    CHECK(fd_rel_error([&](const Matd& p) { return camera_loss(p, gt, 0.1, false).value; }, pred, terms.grad) <= 1e-3);

    // Relabeling views identically in prediction and ground truth.
    Matd pred_perm = pred;
    pred_perm.row(0) = pred.row(3);
    pred_perm.row(3) = pred.row(0);
    auto gt_perm = gt;
    std::swap(gt_perm[0], gt_perm[3]);
    CHECK(camera_loss(pred_perm, gt_perm, 0.1).value == doctest::Approx(terms.value).epsilon(1e-14));
  }
  CHECK_THROWS_AS(camera_loss(same.topRows(3), gt, 0.1), Error);
}

TEST_CASE("total loss composition") {
  scenegen::DataConfig dc;
  dc.width = dc.height = 16;
  const auto examples = scenegen::sample_scene_group(3, 4, dc);
  const auto& ex = examples[0];
  const PerceptualBank bank(7);
  LossWeights w;

  const Matd rgb = image_rows(ex.target.rgb);
  const Matd xyz = image_rows(ex.target.pointmap);
  const Matd conf = Matd::Ones(256, 1);
  Matd cam(4, 9);
  for (int i = 0; i < 4; ++i) cam.row(i) = pose_vector((*ex.sources)[static_cast<std::size_t>(i)].pose);
  const auto perfect = total_loss(rgb, xyz, conf, cam, ex, w, bank);
  CHECK(perfect.total == 0.0);

  std::mt19937_64 rng(9);
  const Matd prgb = uniform(256, 3, rng, 0, 1);
  const Matd pxyz = xyz + uniform(256, 3, rng, -0.1, 0.1);
  const Matd pconf = uniform(256, 1, rng, 0.5, 2);
  const Matd pcam = cam + uniform(4, 9, rng, -0.2, 0.2);
  LossGradients grads;
  const auto r = total_loss(prgb, pxyz, pconf, pcam, ex, w, bank, &grads);
  CHECK(std::abs(r.total - (r.rgb_mse + 0.5 * r.rgb_perceptual + 0.2 * r.pmap + 1.0 * r.cam)) <= 1e-12);

  auto rgb_only = w;
  rgb_only.pmap = 0.0;
  rgb_only.camera = 0.0;
  const auto r2 = total_loss(prgb, pxyz, pconf, pcam, ex, rgb_only, bank);
  CHECK(r2.total == doctest::Approx(r.rgb_mse + 0.5 * r.rgb_perceptual).epsilon(1e-14));

  // Background pixels carry no point-map gradient.
  for (std::size_t i = 0; i < ex.target.mask.data.size(); ++i) {
    if (!ex.target.mask.data[i]) {
      CHECK(grads.xyz.row(static_cast<Eigen::Index>(i)).norm() == 0.0);
      CHECK(grads.confidence(static_cast<Eigen::Index>(i), 0) == 0.0);
    }
  }

  auto total_of = [&](const Matd& a, const Matd& b, const Matd& c, const Matd& d) {
    return total_loss(a, b, c, d, ex, w, bank).total;
  };
  CHECK(fd_rel_error([&](const Matd& x) { return total_of(prgb, pxyz, pconf, x); }, pcam, grads.camera) <= 1e-3);
  CHECK(fd_rel_error([&](const Matd& x) { return total_of(prgb, pxyz, x, pcam); }, pconf, grads.confidence) <= 1e-3);
}
