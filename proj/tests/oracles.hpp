#pragma once

// Independent reference implementations: plain loops over scalars, no Eigen
// expressions, written from the layer definitions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "twostream/conv3d.hpp"
#include "twostream/recurrent.hpp"

namespace oracle {

using namespace twostream;

inline double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

/// Row k of W [x; h] + b for sample n.
inline double affine(const Tensor& W, const Tensor& b, Index k, const Mat& x, const Mat& h, Index n) {
  const Index in = x.cols();
  double a = b[k];
  for (Index j = 0; j < in; ++j) a += W(k, j) * x(n, j);
  for (Index j = 0; j < h.cols(); ++j) a += W(k, in + j) * h(n, j);
  return a;
}

struct LstmState {
  Mat h, c;
};

/// Gate blocks in order input, forget, output, candidate.
inline LstmState lstm_step(const LstmCellParams& p, const Mat& x, const Mat& h, const Mat& c) {
  const Index n = x.rows(), d = h.cols();
  LstmState out{Mat(n, d), Mat(n, d)};
  for (Index s = 0; s < n; ++s) {
    for (Index k = 0; k < d; ++k) {
      const double ig = sig(affine(p.W, p.b, k, x, h, s));
      const double fg = sig(affine(p.W, p.b, d + k, x, h, s));
      const double og = sig(affine(p.W, p.b, 2 * d + k, x, h, s));
      const double g = std::tanh(affine(p.W, p.b, 3 * d + k, x, h, s));
      const double cn = fg * c(s, k) + ig * g;
      out.c(s, k) = Real(cn);
      out.h(s, k) = Real(og * std::tanh(cn));
    }
  }
  return out;
}

/// h = z h_prev + (1 - z) tanh(W_c [x; r h_prev] + b_c), gates ordered z, r.
inline Mat gru_step(const GruCellParams& p, const Mat& x, const Mat& h) {
  const Index n = x.rows(), d = h.cols(), in = x.cols();
  Mat out(n, d);
  for (Index s = 0; s < n; ++s) {
    std::vector<double> z(static_cast<std::size_t>(d)), rh(static_cast<std::size_t>(d));
    for (Index k = 0; k < d; ++k) {
      z[std::size_t(k)] = sig(affine(p.W_gates, p.b_gates, k, x, h, s));
      rh[std::size_t(k)] = sig(affine(p.W_gates, p.b_gates, d + k, x, h, s)) * h(s, k);
    }
    for (Index k = 0; k < d; ++k) {
      double a = p.b_cand[k];
      for (Index j = 0; j < in; ++j) a += p.W_cand(k, j) * x(s, j);
      for (Index j = 0; j < d; ++j) a += p.W_cand(k, in + j) * rh[std::size_t(j)];
      const double zk = z[std::size_t(k)];
      out(s, k) = Real(zk * h(s, k) + (1 - zk) * std::tanh(a));
    }
  }
  return out;
}

inline Mat rnn_step(const RnnCellParams& p, const Mat& x, const Mat& h) {
  Mat out(x.rows(), h.cols());
  for (Index s = 0; s < x.rows(); ++s) {
    for (Index k = 0; k < h.cols(); ++k) out(s, k) = Real(std::tanh(affine(p.W, p.b, k, x, h, s)));
  }
  return out;
}

/// Zero-padded stride-1 cross-correlation.
inline Tensor conv(const Conv3dParams& p, const Tensor& x) {
  const Index n = x.dim(0), c = x.dim(1), T = x.dim(2), H = x.dim(3), W = x.dim(4);
  const Index f = p.kernels.dim(0), kt = p.kernels.dim(2), kh = p.kernels.dim(3), kw = p.kernels.dim(4);
  const Index pt = p.padding.t, ph = p.padding.h, pw = p.padding.w;
  const Index ot = T + 2 * pt - kt + 1, oh = H + 2 * ph - kh + 1, ow = W + 2 * pw - kw + 1;
  Tensor y({n, f, ot, oh, ow});
  for (Index s = 0; s < n; ++s)
    for (Index o = 0; o < f; ++o)
      for (Index t = 0; t < ot; ++t)
        for (Index i = 0; i < oh; ++i)
          for (Index j = 0; j < ow; ++j) {
            double acc = p.bias[o];
            for (Index ch = 0; ch < c; ++ch)
              for (Index a = 0; a < kt; ++a)
                for (Index b = 0; b < kh; ++b)
                  for (Index e = 0; e < kw; ++e) {
                    const Index tt = t + a - pt, ii = i + b - ph, jj = j + e - pw;
                    if (tt < 0 || tt >= T || ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
                    acc += p.kernels(o, ch, a, b, e) * x(s, ch, tt, ii, jj);
                  }
            y(s, o, t, i, j) = Real(acc);
          }
  return y;
}

/// Non-overlapping max; windows at the far edges may be ragged.
inline Tensor pool(Extent3 win, const Tensor& x) {
  const Index n = x.dim(0), c = x.dim(1), T = x.dim(2), H = x.dim(3), W = x.dim(4);
  const Index ot = (T + win.t - 1) / win.t, oh = (H + win.h - 1) / win.h, ow = (W + win.w - 1) / win.w;
  Tensor y({n, c, ot, oh, ow});
  for (Index s = 0; s < n; ++s)
    for (Index ch = 0; ch < c; ++ch)
      for (Index t = 0; t < ot; ++t)
        for (Index i = 0; i < oh; ++i)
          for (Index j = 0; j < ow; ++j) {
            double m = -std::numeric_limits<double>::infinity();
            for (Index a = t * win.t; a < std::min(T, (t + 1) * win.t); ++a)
              for (Index b = i * win.h; b < std::min(H, (i + 1) * win.h); ++b)
                for (Index e = j * win.w; e < std::min(W, (j + 1) * win.w); ++e) {
                  m = std::max(m, double(x(s, ch, a, b, e)));
                }
            y(s, ch, t, i, j) = Real(m);
          }
  return y;
}

}  // namespace oracle
