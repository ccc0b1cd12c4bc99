#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twostream/checkpoint.hpp"
#include "twostream/conv3d.hpp"
#include "twostream/fusion.hpp"
#include "twostream/heads.hpp"
#include "twostream/optim.hpp"

namespace twostream {

struct ConvGroupSpec {
  std::vector<Index> filters;  // one conv layer per entry
  Extent3 pool{2, 2, 2};
};

/// Conv groups (same-padded 3x3x3 convs + ReLU, then max pooling), fully
/// connected ReLU layers, and a softmax output layer over `classes`.
struct C3dSpec {
  Index channels = 3, frames = 16, height = 112, width = 112;
  std::vector<ConvGroupSpec> groups;
  std::vector<Index> fc{4096, 4096};
  int classes = 60;
  Extent3 kernel{3, 3, 3};

  /// Eight convolutions in five groups (64, 128, 256x2, 512x2, 512x2
  /// filters), first pool 1x2x2, two 4096-unit fc layers.
  static C3dSpec full(int classes = 60);
  /// Same layer kinds and order at desk scale: two groups of 8 and 16 filters, fc 64.
  static C3dSpec desk(int classes, Index channels, Index frames, Index height, Index width);

  struct LayerShape {
    std::string name;
    Shape shape;  // per-sample output shape
    Index parameters;
  };

  /// Per-layer output shapes; throws InputError naming the first bad layer.
  std::vector<LayerShape> shape_chain() const;
  Index parameter_count() const;
  void validate() const { shape_chain(); }
};

class C3dModel {
 public:
  C3dModel(const C3dSpec& spec, Rng& rng);
  static C3dModel zeros(const C3dSpec& spec);

  struct Cache {
    std::vector<Conv3dCache> conv;
    std::vector<Tensor> conv_out;  // post-ReLU
    std::vector<Pool3dCache> pool;
    Shape flat_shape;
    std::vector<DenseCache> fc;
  };

  struct Output {
    Mat logits;
    Mat fc6;  // first fully-connected activations, the feature tap
    Cache cache;
  };

  /// clips: [n x c x t x h x w]
  Output forward(const Tensor& clips) const;
  /// Writes parameter gradients into the grad buffers exposed by params().
  void backward(const Cache& cache, const MatRef& grad_logits);

  std::vector<ParamRef> params();
  const C3dSpec& spec() const { return spec_; }
  Index feature_width() const { return spec_.fc.front(); }

  void save(Checkpoint& ckpt) const;
  static C3dModel load(const Checkpoint& ckpt);

 private:
  explicit C3dModel(const C3dSpec& spec);

  C3dSpec spec_;
  std::vector<Conv3dParams> conv_;  // flattened over groups
  std::vector<std::size_t> pool_after_;  // conv index closing each group
  std::vector<Pool3dSpec> pools_;
  std::vector<DenseParams> fc_;  // hidden layers then output
  std::vector<Conv3dParams> conv_grad_;
  std::vector<DenseParams> fc_grad_;
};

/// Splits [C x T x H x W] into non-overlapping clips of `clip_len` frames.
/// A trailing remainder of at least clip_len/2 frames (or a video shorter
/// than one clip) is padded by repeating its last frame; shorter remainders
/// are dropped. Empty videos are an InputError.
std::vector<Tensor> clip_split(const Tensor& video, Index clip_len = 16);

/// Arithmetic mean of clip-level probability rows.
Prediction clip_average(const MatRef& clip_probs);
/// Arithmetic mean of clip-level feature rows.
Vec clip_average_features(const MatRef& clip_features);

/// Spatial crops of [C x T x H x W]. Random crops draw the top-left corner uniformly.
Tensor center_crop(const Tensor& video, Index height, Index width);
Tensor random_crop(const Tensor& video, Index height, Index width, Rng& rng);

}  // namespace twostream
