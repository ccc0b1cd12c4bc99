#include "twostream/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace twostream {

Prediction Prediction::from_probs(const Eigen::Ref<const Vec>& probs) {
  if (probs.size() < 1) throw InputError("prediction needs at least one class");
  if (std::abs(double(probs.sum()) - 1.0) > 1e-9) throw InputError("prediction probabilities do not sum to 1");
  Prediction p{probs, 0, 0};
  for (Index k = 1; k < probs.size(); ++k) {
    if (probs(k) > probs(p.label)) p.label = int(k);
  }
  p.confidence = double(probs(p.label));
  return p;
}

const Prediction& decision_fuse(const TrustWeights& w, const Prediction& rnn, const Prediction& cnn) {
  if (rnn.probs.size() != cnn.probs.size()) {
    throw DimensionError("decision_fuse: streams predict " + std::to_string(rnn.probs.size()) + " and " +
                         std::to_string(cnn.probs.size()) + " classes");
  }
  return w.rnn * rnn.confidence > w.cnn * cnn.confidence ? rnn : cnn;
}

double fused_accuracy(const TrustWeights& w, std::span<const Prediction> rnn, std::span<const Prediction> cnn,
                      std::span<const int> labels) {
  if (rnn.size() != cnn.size() || rnn.size() != labels.size()) {
    throw DimensionError("fusion: prediction and label lists are not aligned");
  }
  if (labels.empty()) throw InputError("fusion: empty validation set");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (decision_fuse(w, rnn[i], cnn[i]).label == labels[i]) ++correct;
  }
  return double(correct) / double(labels.size());
}

std::vector<double> trust_weight_grid() {
  std::vector<double> grid;
  for (int j = 0; j < 100; ++j) grid.push_back(std::pow(10.0, -1.0 + 2.0 * j / 99.0));
  grid.push_back(1.0);
  std::sort(grid.begin(), grid.end());
  return grid;
}

TrustSearchResult search_trust_weights(std::span<const Prediction> rnn, std::span<const Prediction> cnn,
                                       std::span<const int> labels) {
  TrustSearchResult best{{1.0, 0.0}, -1.0};
  for (double wc : trust_weight_grid()) {
    const TrustWeights w{1.0, wc};
    const double acc = fused_accuracy(w, rnn, cnn, labels);
    if (acc > best.accuracy) best = {w, acc};
  }
  return best;
}

Mat feature_fuse(const MatRef& rnn_features, const MatRef& cnn_features) {
  if (rnn_features.rows() != cnn_features.rows()) {
    throw DimensionError("feature_fuse: " + std::to_string(rnn_features.rows()) + " RNN rows vs " +
                         std::to_string(cnn_features.rows()) + " CNN rows");
  }
  Mat joined(rnn_features.rows(), rnn_features.cols() + cnn_features.cols());
  joined << rnn_features, cnn_features;
  return l2_normalize_rows(joined);
}

std::vector<Prediction> predictions_from(const MatRef& probs) {
  std::vector<Prediction> out;
  out.reserve(std::size_t(probs.rows()));
  for (Index r = 0; r < probs.rows(); ++r) out.push_back(Prediction::from_probs(probs.row(r).transpose()));
  return out;
}

}  // namespace twostream
