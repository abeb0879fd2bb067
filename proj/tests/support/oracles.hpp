#pragma once

// Independent reference implementations shared by the unit and acceptance tests.
// Nothing here calls into the code under test beyond plain data types.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rng/attention/attention.hpp"
#include "rng/common/image.hpp"
#include "rng/scenegen/scene.hpp"

namespace rng::oracle {

template <typename T>
nn::Mat<T> random_mat(int r, int c, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> n(0.0, s);
  nn::Mat<T> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(n(rng));
  return m;
}

template <typename T>
attention::AttentionParams<T> random_attention_params(int d, std::mt19937_64& rng) {
  attention::AttentionParams<T> p;
  p.qkv_w.value = random_mat<T>(d, 3 * d, rng, 0.3);
  p.qkv_b.value = random_mat<T>(1, 3 * d, rng, 0.1);
  p.out_w.value = random_mat<T>(d, d, rng, 0.3);
  p.out_b.value = random_mat<T>(1, d, rng, 0.1);
  return p;
}

// Direct O(n^2) multi-head attention with an explicit 0/1 mask matrix.
inline nn::Mat<double> dense_attention(const nn::Mat<double>& x, const attention::AttentionParams<double>& p,
                                       int heads, const Eigen::MatrixXi& m) {
  const int n = static_cast<int>(x.rows());
  const int d = static_cast<int>(x.cols());
  const int dh = d / heads;
  nn::Mat<double> qkv = x * p.qkv_w.value;
  qkv.rowwise() += p.qkv_b.value.row(0);
  nn::Mat<double> att = nn::Mat<double>::Zero(n, d);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd logits = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
      for (int j = 0; j < n; ++j) {
        if (!m(i, j)) continue;
        double s = 0;
        for (int c = 0; c < dh; ++c) s += qkv(i, h * dh + c) * qkv(j, d + h * dh + c);
        logits[j] = s / std::sqrt(static_cast<double>(dh));
      }
      const double mx = logits.maxCoeff();
      Eigen::VectorXd w = (logits.array() - mx).exp();
      w /= w.sum();
      for (int j = 0; j < n; ++j) {
        for (int c = 0; c < dh; ++c) att(i, h * dh + c) += w[j] * qkv(j, 2 * d + h * dh + c);
      }
    }
  }
  nn::Mat<double> out = att * p.out_w.value;
  out.rowwise() += p.out_b.value.row(0);
  return out;
}

// Entry/exit interval of a ray against one primitive, computed as the
// intersection of per-axis slabs (boxes), the quadratic shell (spheres), or
// the infinite-cylinder interval clipped to the y slab (cylinders).
struct Interval {
  double enter = -std::numeric_limits<double>::infinity();
  double exit = std::numeric_limits<double>::infinity();
  bool empty() const { return enter > exit; }
};

inline Interval clip(Interval a, double lo, double hi) {
  a.enter = std::max(a.enter, lo);
  a.exit = std::min(a.exit, hi);
  return a;
}

inline Interval slab(double origin, double dir, double lo, double hi) {
  if (dir == 0.0) {
    if (origin < lo || origin > hi) return {1.0, 0.0};
    return {};
  }
  double t0 = (lo - origin) / dir;
  double t1 = (hi - origin) / dir;
  if (t0 > t1) std::swap(t0, t1);
  return {t0, t1};
}

inline Interval quadratic(double a, double b, double c) {
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return {1.0, 0.0};
  const double q = std::sqrt(disc);
  return {(-b - q) / (2 * a), (-b + q) / (2 * a)};
}

inline Interval ray_interval(const scenegen::Primitive& p, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  const Eigen::Vector3d rel = o - p.center;
  switch (p.kind) {
    case scenegen::PrimitiveKind::kSphere:
      return quadratic(d.squaredNorm(), 2 * rel.dot(d), rel.squaredNorm() - p.size.x() * p.size.x());
    case scenegen::PrimitiveKind::kBox: {
      Interval in;
      for (int a = 0; a < 3; ++a) {
        const auto s = slab(rel[a], d[a], -p.size[a], p.size[a]);
        in = clip(in, s.enter, s.exit);
      }
      return in;
    }
    case scenegen::PrimitiveKind::kCylinder: {
      const double a = d.x() * d.x() + d.z() * d.z();
      Interval side;
      if (a == 0.0) {
        if (std::hypot(rel.x(), rel.z()) > p.size.x()) return {1.0, 0.0};
      } else {
        side = quadratic(a, 2 * (rel.x() * d.x() + rel.z() * d.z()),
                         rel.x() * rel.x() + rel.z() * rel.z() - p.size.x() * p.size.x());
      }
      const auto s = slab(rel.y(), d.y(), -p.size.y(), p.size.y());
      return clip(side, s.enter, s.exit);
    }
  }
  return {1.0, 0.0};
}

// Nearest positive entry over all primitives, or 0 on a miss.
inline double ray_distance(const scenegen::ProceduralScene& scene, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : scene.primitives) {
    const auto in = ray_interval(p, o, d);
    if (!in.empty() && in.enter > 0) best = std::min(best, in.enter);
  }
  return std::isfinite(best) ? best : 0.0;
}

inline double brute_chamfer(const std::vector<Eigen::Vector3f>& a, const std::vector<Eigen::Vector3f>& b) {
  auto one_side = [](const auto& from, const auto& to) {
    double sum = 0.0;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to) {
        const double dx = static_cast<double>(p.x()) - q.x();
        const double dy = static_cast<double>(p.y()) - q.y();
        const double dz = static_cast<double>(p.z()) - q.z();
        best = std::min(best, dx * dx + dy * dy + dz * dz);
      }
      sum += std::sqrt(best);
    }
    return sum / static_cast<double>(from.size());
  };
  return 0.5 * one_side(a, b) + 0.5 * one_side(b, a);
}

// SSIM by direct 2D convolution with an 11x11 Gaussian (sigma 1.5) at every
// valid window position, averaged over channels.
inline double ssim_direct(const ImageF& a, const ImageF& b) {
  constexpr int k = 11;
  double kernel[k][k];
  double norm = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double r2 = (i - 5.0) * (i - 5.0) + (j - 5.0) * (j - 5.0);
      kernel[i][j] = std::exp(-r2 / (2 * 1.5 * 1.5));
      norm += kernel[i][j];
    }
  }
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0.0;
  for (int c = 0; c < a.channels; ++c) {
    double sum = 0.0;
    int count = 0;
    for (int y = 0; y + k <= a.height; ++y) {
      for (int x = 0; x + k <= a.width; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            const double w = kernel[i][j] / norm;
            const double p = a.at(y + i, x + j, c), q = b.at(y + i, x + j, c);
            mx += w * p;
            my += w * q;
            sxx += w * p * p;
            syy += w * q * q;
            sxy += w * p * q;
          }
        }
        const double vx = sxx - mx * mx, vy = syy - my * my, cov = sxy - mx * my;
        sum += (2 * mx * my + c1) * (2 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        ++count;
      }
    }
    total += sum / count;
  }
  return total / a.channels;
}

// Relative error of an analytic gradient against central differences.
inline double fd_rel_error(const std::function<double(const nn::Mat<double>&)>& f, const nn::Mat<double>& x,
                           const nn::Mat<double>& analytic, double h = 1e-5) {
  nn::Mat<double> numeric(x.rows(), x.cols());
  nn::Mat<double> probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = probe.data()[i];
    probe.data()[i] = orig + h;
    const double fp = f(probe);
    probe.data()[i] = orig - h;
    const double fm = f(probe);
    probe.data()[i] = orig;
    numeric.data()[i] = (fp - fm) / (2 * h);
  }
  return (analytic - numeric).norm() / std::max(numeric.norm(), 1e-12);
}

}  // namespace rng::oracle
