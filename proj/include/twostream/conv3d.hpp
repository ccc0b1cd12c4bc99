#pragma once

#include <array>

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

/// (time, height, width) triple.
struct Extent3 {
  Index t = 1, h = 1, w = 1;
  friend bool operator==(const Extent3&, const Extent3&) = default;
  Index volume() const { return t * h * w; }
};

/// Stride-1 3D cross-correlation (no kernel flip) over [n x c x t x h x w].
struct Conv3dParams {
  Tensor kernels;  // [f x c x kt x kh x kw]
  Tensor bias;     // [f]
  Extent3 padding{0, 0, 0};

  static Conv3dParams zeros(Index filters, Index channels, Extent3 kernel, Extent3 padding);
  static Conv3dParams glorot(Index filters, Index channels, Extent3 kernel, Extent3 padding, Rng& rng);

  Index filters() const { return kernels.dim(0); }
  Index channels() const { return kernels.dim(1); }
  Extent3 kernel() const { return {kernels.dim(2), kernels.dim(3), kernels.dim(4)}; }
  /// Output extent for an input extent, or a DimensionError if it would be empty.
  Extent3 output_extent(Extent3 input) const;
};

struct Conv3dCache {
  Tensor input;
};

struct Conv3dOutput {
  Tensor y;  // [n x f x t' x h' x w']
  Conv3dCache cache;
};

Conv3dOutput conv3d_forward(const Conv3dParams& p, const Tensor& x);

struct Conv3dGrads {
  Tensor kernels;
  Tensor bias;
  Tensor input;
};

Conv3dGrads conv3d_backward(const Conv3dParams& p, const Conv3dCache& cache, const Tensor& grad_y);

/// Non-overlapping max pooling, stride == window. Extents that are not a
/// multiple of the window are padded on the right with -inf, so the output
/// extent is ceil(in / window).
struct Pool3dSpec {
  Extent3 window{2, 2, 2};
  Extent3 output_extent(Extent3 input) const;
};

struct Pool3dCache {
  Shape input_shape;
  std::vector<Index> argmax;  // flat input offset per output element
};

struct Pool3dOutput {
  Tensor y;
  Pool3dCache cache;
};

/// Ties resolve to the first position in (t, h, w) scan order.
Pool3dOutput maxpool3d(const Pool3dSpec& spec, const Tensor& x);
Tensor maxpool3d_backward(const Pool3dCache& cache, const Tensor& grad_y);

}  // namespace twostream
