#include "twostream/conv3d.hpp"

#include <limits>

#include "twostream/init.hpp"

namespace twostream {
namespace {

Extent3 spatial_extent(const Tensor& x) { return {x.dim(2), x.dim(3), x.dim(4)}; }

Index ceil_div(Index a, Index b) { return (a + b - 1) / b; }

// Patch matrix of one sample: rows (c, kt, kh, kw), columns output positions.
Mat im2col(const Real* x, Index channels, Extent3 in, Extent3 k, Extent3 pad, Extent3 out) {
  Mat col = Mat::Zero(channels * k.volume(), out.volume());
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    const Real* xc = x + c * in.volume();
    for (Index a = 0; a < k.t; ++a) {
      for (Index b = 0; b < k.h; ++b) {
        for (Index e = 0; e < k.w; ++e, ++row) {
          Real* dst = col.row(row).data();
          for (Index t = 0; t < out.t; ++t) {
            const Index it = t + a - pad.t;
            if (it < 0 || it >= in.t) continue;
            for (Index y = 0; y < out.h; ++y) {
              const Index iy = y + b - pad.h;
              if (iy < 0 || iy >= in.h) continue;
              const Real* src = xc + (it * in.h + iy) * in.w;
              Real* d = dst + (t * out.h + y) * out.w;
              for (Index x0 = 0; x0 < out.w; ++x0) {
                const Index ix = x0 + e - pad.w;
                if (ix >= 0 && ix < in.w) d[x0] = src[ix];
              }
            }
          }
        }
      }
    }
  }
  return col;
}

void col2im_add(const Mat& col, Real* dx, Index channels, Extent3 in, Extent3 k, Extent3 pad, Extent3 out) {
  Index row = 0;
  for (Index c = 0; c < channels; ++c) {
    Real* xc = dx + c * in.volume();
    for (Index a = 0; a < k.t; ++a) {
      for (Index b = 0; b < k.h; ++b) {
        for (Index e = 0; e < k.w; ++e, ++row) {
          const Real* src = col.row(row).data();
          for (Index t = 0; t < out.t; ++t) {
            const Index it = t + a - pad.t;
            if (it < 0 || it >= in.t) continue;
            for (Index y = 0; y < out.h; ++y) {
              const Index iy = y + b - pad.h;
              if (iy < 0 || iy >= in.h) continue;
              Real* d = xc + (it * in.h + iy) * in.w;
              const Real* s = src + (t * out.h + y) * out.w;
              for (Index x0 = 0; x0 < out.w; ++x0) {
                const Index ix = x0 + e - pad.w;
                if (ix >= 0 && ix < in.w) d[ix] += s[x0];
              }
            }
          }
        }
      }
    }
  }
}

void check_input(const Conv3dParams& p, const Tensor& x) {
  if (x.ndim() != 5 || x.dim(1) != p.channels()) {
    throw DimensionError("conv3d: input " + shape_string(x.shape()) + " does not match kernels " +
                         shape_string(p.kernels.shape()));
  }
}

}  // namespace

Conv3dParams Conv3dParams::zeros(Index filters, Index channels, Extent3 kernel, Extent3 padding) {
  return {Tensor({filters, channels, kernel.t, kernel.h, kernel.w}), Tensor({filters}), padding};
}

Conv3dParams Conv3dParams::glorot(Index filters, Index channels, Extent3 kernel, Extent3 padding, Rng& rng) {
  auto p = zeros(filters, channels, kernel, padding);
  glorot_fill(p.kernels, channels * kernel.volume(), filters * kernel.volume(), rng);
  return p;
}

Extent3 Conv3dParams::output_extent(Extent3 input) const {
  const Extent3 k = kernel();
  const Extent3 out{input.t + 2 * padding.t - k.t + 1, input.h + 2 * padding.h - k.h + 1,
                    input.w + 2 * padding.w - k.w + 1};
  if (out.t < 1 || out.h < 1 || out.w < 1) {
    throw DimensionError("conv3d: input extent " + shape_string({input.t, input.h, input.w}) +
                         " is smaller than kernel " + shape_string({k.t, k.h, k.w}) + " after padding");
  }
  return out;
}

Conv3dOutput conv3d_forward(const Conv3dParams& p, const Tensor& x) {
  check_input(p, x);
  const Index n = x.dim(0), c = p.channels(), f = p.filters();
  const Extent3 in = spatial_extent(x), k = p.kernel(), out = p.output_extent(in);
  Conv3dOutput result{Tensor({n, f, out.t, out.h, out.w}), {x}};
  const auto K = Eigen::Map<const Mat>(p.kernels.data(), f, c * k.volume());
  for (Index s = 0; s < n; ++s) {
    const Mat col = im2col(x.data() + s * c * in.volume(), c, in, k, p.padding, out);
    auto y = Eigen::Map<Mat>(result.y.data() + s * f * out.volume(), f, out.volume());
    y.noalias() = K * col;
    y.colwise() += p.bias.vector();
  }
  return result;
}

Conv3dGrads conv3d_backward(const Conv3dParams& p, const Conv3dCache& cache, const Tensor& grad_y) {
  const Tensor& x = cache.input;
  check_input(p, x);
  const Index n = x.dim(0), c = p.channels(), f = p.filters();
  const Extent3 in = spatial_extent(x), k = p.kernel(), out = p.output_extent(in);
  if (grad_y.shape() != Shape{n, f, out.t, out.h, out.w}) {
    throw DimensionError("conv3d_backward: gradient " + shape_string(grad_y.shape()) + " does not match output " +
                         shape_string({n, f, out.t, out.h, out.w}));
  }
  Conv3dGrads g{Tensor(p.kernels.shape()), Tensor(p.bias.shape()), Tensor(x.shape())};
  const auto K = Eigen::Map<const Mat>(p.kernels.data(), f, c * k.volume());
  auto dK = Eigen::Map<Mat>(g.kernels.data(), f, c * k.volume());
  for (Index s = 0; s < n; ++s) {
    const auto dy = Eigen::Map<const Mat>(grad_y.data() + s * f * out.volume(), f, out.volume());
    const Mat col = im2col(x.data() + s * c * in.volume(), c, in, k, p.padding, out);
    dK.noalias() += dy * col.transpose();
    g.bias.vector() += dy.rowwise().sum();
    const Mat dcol = K.transpose() * dy;
    col2im_add(dcol, g.input.data() + s * c * in.volume(), c, in, k, p.padding, out);
  }
  return g;
}

Extent3 Pool3dSpec::output_extent(Extent3 input) const {
  return {ceil_div(input.t, window.t), ceil_div(input.h, window.h), ceil_div(input.w, window.w)};
}

Pool3dOutput maxpool3d(const Pool3dSpec& spec, const Tensor& x) {
  if (x.ndim() != 5) throw DimensionError("maxpool3d expects [n x c x t x h x w], got " + shape_string(x.shape()));
  const Index planes = x.dim(0) * x.dim(1);
  const Extent3 in = spatial_extent(x), out = spec.output_extent(in), win = spec.window;
  Pool3dOutput result{Tensor({x.dim(0), x.dim(1), out.t, out.h, out.w}), {x.shape(), {}}};
  result.cache.argmax.resize(std::size_t(result.y.size()));
  Index o = 0;
  for (Index pl = 0; pl < planes; ++pl) {
    const Index base = pl * in.volume();
    for (Index t = 0; t < out.t; ++t) {
      for (Index y = 0; y < out.h; ++y) {
        for (Index w = 0; w < out.w; ++w, ++o) {
          Real best = -std::numeric_limits<Real>::infinity();
          Index best_at = -1;
          for (Index a = t * win.t; a < std::min((t + 1) * win.t, in.t); ++a) {
            for (Index b = y * win.h; b < std::min((y + 1) * win.h, in.h); ++b) {
              for (Index e = w * win.w; e < std::min((w + 1) * win.w, in.w); ++e) {
                const Index at = base + (a * in.h + b) * in.w + e;
                if (best_at < 0 || x[at] > best) {
                  best = x[at];
                  best_at = at;
                }
              }
            }
          }
          result.y[o] = best;
          result.cache.argmax[std::size_t(o)] = best_at;
        }
      }
    }
  }
  return result;
}

Tensor maxpool3d_backward(const Pool3dCache& cache, const Tensor& grad_y) {
  if (grad_y.size() != Index(cache.argmax.size())) throw DimensionError("maxpool3d_backward: gradient size mismatch");
  Tensor dx(cache.input_shape);
  for (Index o = 0; o < grad_y.size(); ++o) dx[cache.argmax[std::size_t(o)]] += grad_y[o];
  return dx;
}

}  // namespace twostream
