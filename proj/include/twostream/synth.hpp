#pragma once

#include <utility>
#include <vector>

#include "twostream/data.hpp"

namespace twostream {

/// Knobs for the paired skeleton/video generator.
///
/// Every class owns a skeleton signature and a video signature. The skeleton
/// signature is a pair of slow strokes of the limb joints, one in the opening
/// and one in the closing phase of the sequence, separated by a
/// class-independent distractor stroke. The video signature is a drifting
/// grating (orientation, drift direction) visible in every frame. Classes
/// listed together in `skeleton_shared` get the same skeleton signature (only
/// video separates them); pairs in `video_shared` get the same grating.
struct SynthConfig {
  int classes = 6;
  int samples_per_class = 60;
  Index t_min = 24;
  Index t_max = 48;
  int persons = 2;
  int joints = 5;  // per person
  int subjects = 10;
  int views = 3;
  Index video_channels = 3;
  Index video_frames = 16;
  Index video_height = 16;
  Index video_width = 16;
  double skeleton_noise = 0.05;   // per-coordinate Gaussian jitter
  double origin_jitter = 0.5;     // per-sample random offset of the whole body
  double stroke_amplitude = 0.4;  // signature stroke length
  double distractor_amplitude = 0.4;
  double video_noise = 0.1;
  double video_contrast = 0.5;
  std::vector<std::pair<int, int>> skeleton_shared{{0, 1}};
  std::vector<std::pair<int, int>> video_shared{{2, 3}};

  /// Throws InputError on inconsistent settings.
  void validate() const;
  Index skeleton_width() const { return Index(persons) * joints * 3; }
};

/// Signature index per class after merging the shared pairs; classes are
/// numbered in order of first appearance.
std::vector<int> signature_ids(int classes, const std::vector<std::pair<int, int>>& shared);

Dataset generate_synthetic(const SynthConfig& cfg, Rng& rng);

}  // namespace twostream
