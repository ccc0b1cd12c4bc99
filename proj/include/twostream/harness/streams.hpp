#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "twostream/c3d.hpp"
#include "twostream/checkpoint.hpp"
#include "twostream/data.hpp"
#include "twostream/harness/config.hpp"
#include "twostream/harness/skeleton_model.hpp"

namespace twostream {

/// A trainable classifier over one modality of a Dataset.
class Stream {
 public:
  virtual ~Stream() = default;

  virtual std::string name() const = 0;
  virtual int classes() const = 0;
  /// Name of the feature tap ("rnn_fc" or "cnn_fc6").
  virtual std::string tap() const = 0;

  /// Train-mode forward and backward over the samples; gradients land in
  /// params(). Returns the mean cross-entropy.
  virtual double train_batch(const Dataset& data, std::span<const int> indices, Rng& rng) = 0;
  virtual std::vector<ParamRef> params() = 0;

  /// Re-estimates inference statistics (BN running stats) from the samples
  /// without touching weights. No-op for models without such statistics.
  virtual void refresh_statistics(const Dataset&, std::span<const int>) {}

  /// Inference-mode class probabilities, one row per sample.
  virtual Mat predict(const Dataset& data, std::span<const int> indices) = 0;
  /// Feature-tap activations, one row per sample. Throws InputError if the model has no tap.
  virtual Mat features(const Dataset& data, std::span<const int> indices) = 0;

  virtual Checkpoint checkpoint() const = 0;
  /// Replaces all weights and statistics; previously returned ParamRefs dangle.
  virtual void restore(const Checkpoint& ckpt) = 0;
};

/// Skeleton variants pad each batch and run the recurrent ladder model.
class SkeletonStream final : public Stream {
 public:
  SkeletonStream(SkeletonModel model, Index pad_to);

  std::string name() const override { return model_.spec().name; }
  int classes() const override { return model_.spec().classes; }
  std::string tap() const override { return "rnn_fc"; }
  double train_batch(const Dataset& data, std::span<const int> indices, Rng& rng) override;
  std::vector<ParamRef> params() override { return model_.params(); }
  void refresh_statistics(const Dataset& data, std::span<const int> indices) override;
  Mat predict(const Dataset& data, std::span<const int> indices) override;
  Mat features(const Dataset& data, std::span<const int> indices) override;
  Checkpoint checkpoint() const override;
  void restore(const Checkpoint& ckpt) override;

  SkeletonModel& model() { return model_; }
  SequenceBatch batch_of(const Dataset& data, std::span<const int> indices) const;

 private:
  SkeletonModel model_;
  Index pad_to_;
};

/// Video variants train on every clip of a sample and clip-average at inference.
class VideoStream final : public Stream {
 public:
  VideoStream(std::string variant, C3dModel model, Index clip_len, Index crop);

  std::string name() const override { return variant_; }
  int classes() const override { return model_.spec().classes; }
  std::string tap() const override { return "cnn_fc6"; }
  double train_batch(const Dataset& data, std::span<const int> indices, Rng& rng) override;
  std::vector<ParamRef> params() override { return model_.params(); }
  Mat predict(const Dataset& data, std::span<const int> indices) override;
  Mat features(const Dataset& data, std::span<const int> indices) override;
  Checkpoint checkpoint() const override;
  void restore(const Checkpoint& ckpt) override;

  C3dModel& model() { return model_; }

 private:
  /// Stacked clips [m x c x t x h x w] and the owning sample row of each clip.
  std::pair<Tensor, std::vector<Index>> clips_of(const Dataset& data, std::span<const int> indices, Rng* rng) const;
  Mat per_sample(const Dataset& data, std::span<const int> indices, bool features);

  std::string variant_;
  C3dModel model_;
  Index clip_len_;
  Index crop_;
};

/// C3D spec for a video variant; input extents come from the dataset and config.
C3dSpec c3d_spec_for(const std::string& variant, const Dataset& data, const RunConfig& cfg);

/// Builds the freshly initialized model named by cfg.model for this dataset.
std::unique_ptr<Stream> make_stream(const RunConfig& cfg, const Dataset& data, Rng& rng);
std::unique_ptr<Stream> load_stream(const Checkpoint& ckpt);

/// Largest skeleton length over the dataset.
Index longest_sequence(const Dataset& data);

}  // namespace twostream
