#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "twostream/recurrent.hpp"
#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

/// Joint track [T x joints x 3]; joints of all persons are concatenated.
struct SkeletonSequence {
  Tensor coords;
  int label = 0;
  int subject = 0;
  int view = 0;

  Index length() const { return coords.dim(0); }
  Index width() const { return coords.size() / coords.dim(0); }
};

/// Pixel block [C x T x H x W] with values in [0, 1].
struct VideoVolume {
  Tensor pixels;
  int label = 0;
  int subject = 0;
  int view = 0;

  Index frames() const { return pixels.dim(1); }
};

/// One recording: both modalities share id, label, subject and view.
struct Sample {
  int id = 0;
  SkeletonSequence skeleton;
  VideoVolume video;

  int label() const { return skeleton.label; }
};

struct Dataset {
  std::vector<Sample> samples;
  int num_classes = 0;

  std::vector<int> labels(std::span<const int> indices) const;
  std::vector<std::string> class_names() const;
};

/// Zero-pads each [T_i x J x 3] track to [T_max x (J*3)] and records lengths.
/// Throws InputError for any track longer than t_max.
SequenceBatch pad_sequences(std::span<const Tensor* const> tracks, Index t_max);
SequenceBatch pad_sequences(std::span<const Tensor> tracks, Index t_max);

enum class SplitMode { CrossSubject, CrossView };

struct SplitSpec {
  SplitMode mode = SplitMode::CrossSubject;
  double val_fraction = 0.1;  // of training-side subjects, rounded up, at least 1
};

/// Sample indices into Dataset::samples, each list in ascending order.
struct Splits {
  std::vector<int> train, val, test;
};

/// Cross-subject: ceil(S/2) shuffled subjects form the training side.
/// Cross-view: one shuffled view is held out for testing.
/// Validation subjects are then carved from the training side.
Splits make_splits(const Dataset& data, const SplitSpec& spec, Rng& rng);

SplitMode parse_split_mode(const std::string& name);
std::string split_mode_name(SplitMode mode);

/// Directory layout: manifest.tsv plus skeleton/<id>.tsr and video/<id>.tsr.
/// manifest.tsv columns: sample_id label subject view skeleton_path video_path
/// (tab-separated, header row, paths relative to the directory).
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace twostream
