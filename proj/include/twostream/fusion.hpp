#pragma once

#include <span>
#include <vector>

#include "twostream/tensor.hpp"

namespace twostream {

/// Class-probability vector with its argmax and the winning probability.
struct Prediction {
  Vec probs;
  int label = 0;
  double confidence = 0;

  /// Validates that probs sums to 1 within 1e-9; ties go to the lower class.
  static Prediction from_probs(const Eigen::Ref<const Vec>& probs);
};

struct TrustWeights {
  double rnn = 1.0;
  double cnn = 1.0;
};

/// Returns the RNN prediction iff w_r * conf_r > w_c * conf_c, else the CNN one.
const Prediction& decision_fuse(const TrustWeights& w, const Prediction& rnn, const Prediction& cnn);

struct TrustSearchResult {
  TrustWeights weights;
  double accuracy = 0;
};

/// Candidate CNN weights: 100 log-spaced values in [0.1, 10] plus 1.0.
std::vector<double> trust_weight_grid();

/// Holds w_r = 1 and picks the grid w_c with the best validation accuracy,
/// lowest w_c on ties.
TrustSearchResult search_trust_weights(std::span<const Prediction> rnn, std::span<const Prediction> cnn,
                                       std::span<const int> labels);

double fused_accuracy(const TrustWeights& w, std::span<const Prediction> rnn, std::span<const Prediction> cnn,
                      std::span<const int> labels);

/// Row-wise [rnn | cnn] concatenation followed by L2 normalization.
Mat feature_fuse(const MatRef& rnn_features, const MatRef& cnn_features);

std::vector<Prediction> predictions_from(const MatRef& probs);

}  // namespace twostream
