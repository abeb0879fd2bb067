// SPDX-FileCopyrightText: 2026 rng-desk contributors
// SPDX-License-Identifier: Apache-2.0

#include "rng/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

#include "rng/common/error.hpp"

namespace rng::nn {

namespace {

thread_local std::uint64_t tl_flops = 0;

void count_matmul(Eigen::Index m, Eigen::Index n, Eigen::Index k) {
  tl_flops += 2ULL * static_cast<std::uint64_t>(m) * static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(k);
}

void check_same(const auto& a, const auto& b, const char* what) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch, what);
}

}  // namespace

std::uint64_t FlopCounter::get() { return tl_flops; }
void FlopCounter::reset() { tl_flops = 0; }
void FlopCounter::add(std::uint64_t flops) { tl_flops += flops; }

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const auto& A = g.value(a);
  const auto& B = g.value(b);
  require(A.cols() == B.rows(), ErrorCode::kShapeMismatch, "matmul inner dimensions differ");
  Mat<T> out(A.rows(), B.cols());
  out.noalias() = A * B;
  count_matmul(A.rows(), B.cols(), A.cols());
  return g.emit(std::move(out), {a, b}, [&g, a, b](const Mat<T>& dy) {
    g.accumulate_with(a, [&](Mat<T>& da) { da.noalias() += dy * g.value(b).transpose(); });
    g.accumulate_with(b, [&](Mat<T>& db) { db.noalias() += g.value(a).transpose() * dy; });
  });
}

template <typename T>
Var linear(Graph<T>& g, Var x, Var w, Var b, std::span<const RowRange> segments) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  require(X.cols() == W.rows(), ErrorCode::kShapeMismatch, "linear input width does not match the weight");
  Mat<T> out(X.rows(), W.cols());
  if (segments.empty()) {
    out.noalias() = X * W;
  } else {
    int covered = 0;
    for (const auto& s : segments) {
      require(s.begin == covered && s.end <= X.rows(), ErrorCode::kShapeMismatch, "linear segments must tile the rows");
      if (s.size() > 0) out.middleRows(s.begin, s.size()).noalias() = X.middleRows(s.begin, s.size()) * W;
      covered = s.end;
    }
    require(covered == X.rows(), ErrorCode::kShapeMismatch, "linear segments must tile the rows");
  }
  count_matmul(X.rows(), W.cols(), X.cols());
  if (b.valid()) {
    const auto& B = g.value(b);
    require(B.rows() == 1 && B.cols() == W.cols(), ErrorCode::kShapeMismatch, "linear bias shape");
    out.rowwise() += B.row(0);
  }
  return g.emit(std::move(out), {x, w, b}, [&g, x, w, b](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) { dx.noalias() += dy * g.value(w).transpose(); });
    g.accumulate_with(w, [&](Mat<T>& dw) { dw.noalias() += g.value(x).transpose() * dy; });
    if (b.valid()) g.accumulate_with(b, [&](Mat<T>& db) { db += dy.colwise().sum(); });
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  check_same(g.value(a), g.value(b), "add operands differ in shape");
  Mat<T> out = g.value(a) + g.value(b);
  return g.emit(std::move(out), {a, b}, [&g, a, b](const Mat<T>& dy) {
    g.accumulate(a, dy);
    g.accumulate(b, dy);
  });
}

template <typename T>
Var add_row(Graph<T>& g, Var x, Var r) {
  const auto& R = g.value(r);
  require(R.rows() == 1 && R.cols() == g.value(x).cols(), ErrorCode::kShapeMismatch, "add_row shape");
  Mat<T> out = g.value(x);
  out.rowwise() += R.row(0);
  return g.emit(std::move(out), {x, r}, [&g, x, r](const Mat<T>& dy) {
    g.accumulate(x, dy);
    g.accumulate_with(r, [&](Mat<T>& dr) { dr += dy.colwise().sum(); });
  });
}

template <typename T>
Var scale(Graph<T>& g, Var x, T s) {
  Mat<T> out = g.value(x) * s;
  return g.emit(std::move(out), {x}, [&g, x, s](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) { dx += dy * s; });
  });
}

template <typename T>
Var layernorm(Graph<T>& g, Var x, Var gamma, Var beta, T eps) {
  const auto& X = g.value(x);
  const auto& G = g.value(gamma);
  const auto& B = g.value(beta);
  const auto d = X.cols();
  require(G.rows() == 1 && G.cols() == d && B.rows() == 1 && B.cols() == d, ErrorCode::kShapeMismatch,
          "layernorm affine shape");
  auto xhat = std::make_shared<Mat<T>>(X.rows(), d);
  auto inv_std = std::make_shared<Eigen::Matrix<T, Eigen::Dynamic, 1>>(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const T mean = X.row(i).mean();
    const T var = (X.row(i).array() - mean).square().mean();
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)(i) = is;
    xhat->row(i) = (X.row(i).array() - mean) * is;
  }
  Mat<T> out = (xhat->array().rowwise() * G.row(0).array()).rowwise() + B.row(0).array();
  return g.emit(std::move(out), {x, gamma, beta}, [&g, x, gamma, beta, xhat, inv_std](const Mat<T>& dy) {
    g.accumulate_with(gamma, [&](Mat<T>& dg) { dg += (dy.array() * xhat->array()).colwise().sum().matrix(); });
    g.accumulate_with(beta, [&](Mat<T>& db) { db += dy.colwise().sum(); });
    g.accumulate_with(x, [&](Mat<T>& dx) {
      const auto& G = g.value(gamma);
      const T n = static_cast<T>(dy.cols());
      for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        const auto dxhat = (dy.row(i).array() * G.row(0).array()).eval();
        const T m1 = dxhat.sum() / n;
        const T m2 = (dxhat * xhat->row(i).array()).sum() / n;
        dx.row(i).array() += (*inv_std)(i) * (dxhat - m1 - xhat->row(i).array() * m2);
      }
    });
  });
}

template <typename T>
Var gelu(Graph<T>& g, Var x) {
  const T c = static_cast<T>(0.7978845608028654);  // sqrt(2 / pi)
  const T k = static_cast<T>(0.044715);
  const auto& X = g.value(x);
  auto t = std::make_shared<Mat<T>>((c * (X.array() + k * X.array().cube())).tanh().matrix());
  Mat<T> out = (T(0.5) * X.array() * (T(1) + t->array())).matrix();
  return g.emit(std::move(out), {x}, [&g, x, t, c, k](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) {
      const auto& X = g.value(x);
      const auto& th = t->array();
      dx.array() += dy.array() * (T(0.5) * (T(1) + th) +
                                  T(0.5) * X.array() * (T(1) - th.square()) * c * (T(1) + T(3) * k * X.array().square()));
    });
  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  auto y = std::make_shared<Mat<T>>((T(1) / (T(1) + (-g.value(x).array()).exp())).matrix());
  return g.emit(Mat<T>(*y), {x}, [&g, x, y](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) { dx.array() += dy.array() * y->array() * (T(1) - y->array()); });
  });
}

template <typename T>
Var exp_clamp(Graph<T>& g, Var x, T lo, T hi) {
  const auto& X = g.value(x);
  Mat<T> out = X.array().max(lo).min(hi).exp().matrix();
  return g.emit(std::move(out), {x}, [&g, x, lo, hi](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) {
      const auto& X = g.value(x).array();
      const auto inside = (X >= lo && X <= hi).template cast<T>();
      dx.array() += dy.array() * X.max(lo).min(hi).exp() * inside;
    });
  });
}

template <typename T>
Var concat_rows(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kEmptyInput, "concat_rows of nothing");
  const auto cols = g.value(parts.front()).cols();
  Eigen::Index rows = 0;
  for (Var p : parts) {
    require(g.value(p).cols() == cols, ErrorCode::kShapeMismatch, "concat_rows width mismatch");
    rows += g.value(p).rows();
  }
  Mat<T> out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleRows(at, g.value(p).rows()) = g.value(p);
    at += g.value(p).rows();
  }
  return g.emit(std::move(out), parts, [&g, parts](const Mat<T>& dy) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const auto n = g.value(p).rows();
      g.accumulate_with(p, [&](Mat<T>& dp) { dp += dy.middleRows(at, n); });
      at += n;
    }
  });
}

template <typename T>
Var concat_cols(Graph<T>& g, const std::vector<Var>& parts) {
  require(!parts.empty(), ErrorCode::kEmptyInput, "concat_cols of nothing");
  const auto rows = g.value(parts.front()).rows();
  Eigen::Index cols = 0;
  for (Var p : parts) {
    require(g.value(p).rows() == rows, ErrorCode::kShapeMismatch, "concat_cols height mismatch");
    cols += g.value(p).cols();
  }
  Mat<T> out(rows, cols);
  Eigen::Index at = 0;
  for (Var p : parts) {
    out.middleCols(at, g.value(p).cols()) = g.value(p);
    at += g.value(p).cols();
  }
  return g.emit(std::move(out), parts, [&g, parts](const Mat<T>& dy) {
    Eigen::Index at = 0;
    for (Var p : parts) {
      const auto n = g.value(p).cols();
      g.accumulate_with(p, [&](Mat<T>& dp) { dp += dy.middleCols(at, n); });
      at += n;
    }
  });
}

template <typename T>
Var slice_rows(Graph<T>& g, Var x, int begin, int end) {
  const auto& X = g.value(x);
  require(0 <= begin && begin <= end && end <= X.rows(), ErrorCode::kShapeMismatch, "slice_rows out of range");
  Mat<T> out = X.middleRows(begin, end - begin);
  return g.emit(std::move(out), {x}, [&g, x, begin, end](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) { dx.middleRows(begin, end - begin) += dy; });
  });
}

template <typename T>
Var slice_cols(Graph<T>& g, Var x, int begin, int end) {
  const auto& X = g.value(x);
  require(0 <= begin && begin <= end && end <= X.cols(), ErrorCode::kShapeMismatch, "slice_cols out of range");
  Mat<T> out = X.middleCols(begin, end - begin);
  return g.emit(std::move(out), {x}, [&g, x, begin, end](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) { dx.middleCols(begin, end - begin) += dy; });
  });
}

template <typename T>
Var block_attention(Graph<T>& g, Var q, Var k, Var v, int heads, const BlockMask& mask) {
  const auto& Q = g.value(q);
  const auto& K = g.value(k);
  const auto& V = g.value(v);
  const auto d = Q.cols();
  require(heads > 0 && d % heads == 0, ErrorCode::kShapeMismatch, "attention width not divisible by heads");
  require(K.cols() == d && V.cols() == d && K.rows() == V.rows(), ErrorCode::kShapeMismatch,
          "attention q/k/v shapes differ");
  const auto dh = d / heads;
  const T scale_factor = T(1) / std::sqrt(static_cast<T>(dh));

  struct Block {
    RowRange rows;
    std::vector<RowRange> keys;
    Mat<T> k, v;                 // gathered keys / values
    std::vector<Mat<T>> probs;   // per head (rows x keys)
  };
  auto blocks = std::make_shared<std::vector<Block>>();
  blocks->reserve(mask.size());
  Mat<T> out = Mat<T>::Zero(Q.rows(), d);
  const bool keep = g.recording() && (g.requires_grad(q) || g.requires_grad(k) || g.requires_grad(v));

  for (const auto& qb : mask) {
    require(qb.rows.begin >= 0 && qb.rows.end <= Q.rows() && qb.rows.begin <= qb.rows.end,
            ErrorCode::kShapeMismatch, "attention query block out of range");
    const int nq = qb.rows.size();
    if (nq == 0) continue;
    int nk = 0;
    for (const auto& r : qb.keys) {
      require(r.begin >= 0 && r.end <= K.rows() && r.begin <= r.end, ErrorCode::kShapeMismatch,
              "attention key range out of range");
      nk += r.size();
    }
    require(nk > 0, ErrorCode::kStructural, "attention query row admits no keys");
    Block blk{qb.rows, qb.keys, Mat<T>(nk, d), Mat<T>(nk, d), {}};
    int at = 0;
    for (const auto& r : qb.keys) {
      blk.k.middleRows(at, r.size()) = K.middleRows(r.begin, r.size());
      blk.v.middleRows(at, r.size()) = V.middleRows(r.begin, r.size());
      at += r.size();
    }
    for (int h = 0; h < heads; ++h) {
      Mat<T> s(nq, nk);
      s.noalias() = Q.block(qb.rows.begin, h * dh, nq, dh) * blk.k.middleCols(h * dh, dh).transpose();
      s *= scale_factor;
      for (int i = 0; i < nq; ++i) {
        auto row = s.row(i).array();
        row = (row - row.maxCoeff()).exp();
        row /= row.sum();
      }
      out.block(qb.rows.begin, h * dh, nq, dh).noalias() = s * blk.v.middleCols(h * dh, dh);
      count_matmul(nq, nk, dh);
      count_matmul(nq, dh, nk);
      if (keep) blk.probs.push_back(std::move(s));
    }
    if (keep) blocks->push_back(std::move(blk));
  }
  return g.emit(std::move(out), {q, k, v}, [&g, q, k, v, blocks, heads, dh, scale_factor](const Mat<T>& dy) {
    const auto& Q = g.value(q);
    Mat<T> dq = Mat<T>::Zero(Q.rows(), Q.cols());
    Mat<T> dk = Mat<T>::Zero(g.value(k).rows(), Q.cols());
    Mat<T> dv = Mat<T>::Zero(g.value(v).rows(), Q.cols());
    for (const auto& blk : *blocks) {
      const int nq = blk.rows.size();
      const auto nk = blk.k.rows();
      Mat<T> dkb = Mat<T>::Zero(nk, Q.cols());
      Mat<T> dvb = Mat<T>::Zero(nk, Q.cols());
      for (int h = 0; h < heads; ++h) {
        const auto& p = blk.probs[static_cast<std::size_t>(h)];
        const auto dout = dy.block(blk.rows.begin, h * dh, nq, dh);
        dvb.middleCols(h * dh, dh).noalias() += p.transpose() * dout;
        Mat<T> dp(nq, nk);
        dp.noalias() = dout * blk.v.middleCols(h * dh, dh).transpose();
        const auto dot = (dp.array() * p.array()).rowwise().sum().eval();
        Mat<T> ds = (p.array() * (dp.array().colwise() - dot)).matrix() * scale_factor;
        dq.block(blk.rows.begin, h * dh, nq, dh).noalias() += ds * blk.k.middleCols(h * dh, dh);
        dkb.middleCols(h * dh, dh).noalias() += ds.transpose() * Q.block(blk.rows.begin, h * dh, nq, dh);
      }
      int at = 0;
      for (const auto& r : blk.keys) {
        dk.middleRows(r.begin, r.size()) += dkb.middleRows(at, r.size());
        dv.middleRows(r.begin, r.size()) += dvb.middleRows(at, r.size());
        at += r.size();
      }
    }
    g.accumulate(q, dq);
    g.accumulate(k, dk);
    g.accumulate(v, dv);
  });
}

namespace {

template <typename T>
void im2col3x3(const Mat<T>& x, Eigen::Index base, int height, int width, Mat<T>& col) {
  const auto cin = x.cols();
  for (int y = 0; y < height; ++y) {
    for (int xx = 0; xx < width; ++xx) {
      const auto row = static_cast<Eigen::Index>(y) * width + xx;
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = std::clamp(y + dy, 0, height - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = std::clamp(xx + dx, 0, width - 1);
          const auto tap = (dy + 1) * 3 + (dx + 1);
          col.block(row, tap * cin, 1, cin) = x.row(base + static_cast<Eigen::Index>(sy) * width + sx);
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Var conv3x3(Graph<T>& g, Var x, Var w, Var b, int batch, int height, int width) {
  const auto& X = g.value(x);
  const auto& W = g.value(w);
  const auto hw = static_cast<Eigen::Index>(height) * width;
  require(X.rows() == batch * hw, ErrorCode::kShapeMismatch, "conv3x3 input rows != batch*H*W");
  require(W.rows() == 9 * X.cols(), ErrorCode::kShapeMismatch, "conv3x3 weight rows != 9*Cin");
  const bool keep = g.recording() && (g.requires_grad(x) || g.requires_grad(w));
  auto cols = std::make_shared<std::vector<Mat<T>>>();
  Mat<T> out(X.rows(), W.cols());
  Mat<T> col(hw, W.rows());
  for (int n = 0; n < batch; ++n) {
    im2col3x3(X, n * hw, height, width, col);
    out.middleRows(n * hw, hw).noalias() = col * W;
    count_matmul(hw, W.cols(), W.rows());
    if (keep) cols->push_back(col);
  }
  if (b.valid()) out.rowwise() += g.value(b).row(0);
  return g.emit(std::move(out), {x, w, b}, [&g, x, w, b, cols, batch, height, width, hw](const Mat<T>& dy) {
    const auto& W = g.value(w);
    const auto cin = g.value(x).cols();
    if (b.valid()) g.accumulate_with(b, [&](Mat<T>& db) { db += dy.colwise().sum(); });
    g.accumulate_with(w, [&](Mat<T>& dw) {
      for (int n = 0; n < batch; ++n) dw.noalias() += (*cols)[static_cast<std::size_t>(n)].transpose() * dy.middleRows(n * hw, hw);
    });
    g.accumulate_with(x, [&](Mat<T>& dx) {
      Mat<T> dcol(hw, W.rows());
      for (int n = 0; n < batch; ++n) {
        dcol.noalias() = dy.middleRows(n * hw, hw) * W.transpose();
        for (int y = 0; y < height; ++y) {
          for (int xx = 0; xx < width; ++xx) {
            const auto row = static_cast<Eigen::Index>(y) * width + xx;
            for (int ddy = -1; ddy <= 1; ++ddy) {
              const int sy = std::clamp(y + ddy, 0, height - 1);
              for (int ddx = -1; ddx <= 1; ++ddx) {
                const int sx = std::clamp(xx + ddx, 0, width - 1);
                const auto tap = (ddy + 1) * 3 + (ddx + 1);
                dx.row(n * hw + static_cast<Eigen::Index>(sy) * width + sx) += dcol.block(row, tap * cin, 1, cin);
              }
            }
          }
        }
      }
    });
  });
}

template <typename T>
Var upsample2x(Graph<T>& g, Var x, int batch, int height, int width) {
  const auto& X = g.value(x);
  const auto hw = static_cast<Eigen::Index>(height) * width;
  require(X.rows() == batch * hw, ErrorCode::kShapeMismatch, "upsample2x input rows != batch*H*W");
  const int w2 = 2 * width;
  Mat<T> out(X.rows() * 4, X.cols());
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < 2 * height; ++y) {
      for (int xx = 0; xx < w2; ++xx) {
        out.row(n * hw * 4 + static_cast<Eigen::Index>(y) * w2 + xx) =
            X.row(n * hw + static_cast<Eigen::Index>(y / 2) * width + xx / 2);
      }
    }
  }
  return g.emit(std::move(out), {x}, [&g, x, batch, height, width, hw, w2](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) {
      for (int n = 0; n < batch; ++n) {
        for (int y = 0; y < 2 * height; ++y) {
          for (int xx = 0; xx < w2; ++xx) {
            dx.row(n * hw + static_cast<Eigen::Index>(y / 2) * width + xx / 2) +=
                dy.row(n * hw * 4 + static_cast<Eigen::Index>(y) * w2 + xx);
          }
        }
      }
    });
  });
}

namespace {

// Index of the token-feature element that feeds output pixel (n, y, x, c).
struct PatchIndex {
  int grid_h, grid_w, patch, channels;
  std::pair<Eigen::Index, Eigen::Index> operator()(int n, int y, int x, int c) const {
    const Eigen::Index token = (static_cast<Eigen::Index>(n) * grid_h + y / patch) * grid_w + x / patch;
    const Eigen::Index feat = (static_cast<Eigen::Index>(y % patch) * patch + x % patch) * channels + c;
    return {token, feat};
  }
};

}  // namespace

template <typename T>
Var unpatchify(Graph<T>& g, Var x, int batch, int grid_h, int grid_w, int patch, int channels) {
  const auto& X = g.value(x);
  require(X.rows() == static_cast<Eigen::Index>(batch) * grid_h * grid_w &&
              X.cols() == static_cast<Eigen::Index>(patch) * patch * channels,
          ErrorCode::kShapeMismatch, "unpatchify input shape");
  const int h = grid_h * patch;
  const int w = grid_w * patch;
  const PatchIndex idx{grid_h, grid_w, patch, channels};
  Mat<T> out(static_cast<Eigen::Index>(batch) * h * w, channels);
  for (int n = 0; n < batch; ++n) {
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) {
        const auto row = (static_cast<Eigen::Index>(n) * h + y) * w + xx;
        for (int c = 0; c < channels; ++c) {
          const auto [t, f] = idx(n, y, xx, c);
          out(row, c) = X(t, f);
        }
      }
    }
  }
  return g.emit(std::move(out), {x}, [&g, x, batch, h, w, channels, idx](const Mat<T>& dy) {
    g.accumulate_with(x, [&](Mat<T>& dx) {
      for (int n = 0; n < batch; ++n) {
        for (int y = 0; y < h; ++y) {
          for (int xx = 0; xx < w; ++xx) {
            const auto row = (static_cast<Eigen::Index>(n) * h + y) * w + xx;
            for (int c = 0; c < channels; ++c) {
              const auto [t, f] = idx(n, y, xx, c);
              dx(t, f) += dy(row, c);
            }
          }
        }
      }
    });
  });
}

template <typename T>
Mat<T> patchify(std::span<const float> image, int height, int width, int channels, int patch) {
  require(height % patch == 0 && width % patch == 0, ErrorCode::kShapeMismatch,
          "image size not divisible by the patch size");
  require(image.size() == static_cast<std::size_t>(height) * width * channels, ErrorCode::kShapeMismatch,
          "patchify buffer size");
  const int gh = height / patch;
  const int gw = width / patch;
  const PatchIndex idx{gh, gw, patch, channels};
  Mat<T> out(static_cast<Eigen::Index>(gh) * gw, static_cast<Eigen::Index>(patch) * patch * channels);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const auto [t, f] = idx(0, y, x, c);
        out(t, f) = static_cast<T>(image[(static_cast<std::size_t>(y) * width + x) * channels + c]);
      }
    }
  }
  return out;
}

#define RNG_NN_INSTANTIATE(T)                                                                      \
  template Var matmul<T>(Graph<T>&, Var, Var);                                                     \
  template Var linear<T>(Graph<T>&, Var, Var, Var, std::span<const RowRange>);                     \
  template Var add<T>(Graph<T>&, Var, Var);                                                        \
  template Var add_row<T>(Graph<T>&, Var, Var);                                                    \
  template Var scale<T>(Graph<T>&, Var, T);                                                        \
  template Var layernorm<T>(Graph<T>&, Var, Var, Var, T);                                          \
  template Var gelu<T>(Graph<T>&, Var);                                                            \
  template Var sigmoid<T>(Graph<T>&, Var);                                                         \
  template Var exp_clamp<T>(Graph<T>&, Var, T, T);                                                 \
  template Var concat_rows<T>(Graph<T>&, const std::vector<Var>&);                                 \
  template Var concat_cols<T>(Graph<T>&, const std::vector<Var>&);                                 \
  template Var slice_rows<T>(Graph<T>&, Var, int, int);                                            \
  template Var slice_cols<T>(Graph<T>&, Var, int, int);                                            \
  template Var block_attention<T>(Graph<T>&, Var, Var, Var, int, const BlockMask&);                \
  template Var conv3x3<T>(Graph<T>&, Var, Var, Var, int, int, int);                                \
  template Var upsample2x<T>(Graph<T>&, Var, int, int, int);                                       \
  template Var unpatchify<T>(Graph<T>&, Var, int, int, int, int, int);                             \
  template Mat<T> patchify<T>(std::span<const float>, int, int, int, int);

RNG_NN_INSTANTIATE(float)
RNG_NN_INSTANTIATE(double)

}  // namespace rng::nn
