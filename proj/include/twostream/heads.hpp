#pragma once

#include <span>
#include <vector>

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

enum class DenseActivation { None, Relu };

/// y = act(x W^T + b), one sample per row.
struct DenseParams {
  Tensor W;  // [out x in]
  Tensor b;  // [out]
  DenseActivation activation = DenseActivation::None;

  static DenseParams zeros(Index in, Index out, DenseActivation act = DenseActivation::None);
  static DenseParams glorot(Index in, Index out, Rng& rng, DenseActivation act = DenseActivation::None);
  Index inputs() const { return W.dim(1); }
  Index outputs() const { return W.dim(0); }
};

struct DenseCache {
  Mat x;
  Mat y;  // post-activation, used for the ReLU mask
};

struct DenseOutput {
  Mat y;
  DenseCache cache;
};

DenseOutput dense_forward(const DenseParams& p, const MatRef& x);

struct DenseGrads {
  Tensor W;
  Tensor b;
  Mat dx;
};

DenseGrads dense_backward(const DenseParams& p, const DenseCache& cache, const MatRef& dy);

struct LossOutput {
  double loss;
  Mat grad_logits;
};

/// Mean cross-entropy of softmax(logits) against integer labels;
/// gradient is (softmax - onehot) / n.
LossOutput softmax_xent(const MatRef& logits, std::span<const int> labels);

// ---------------------------------------------------------------------------
// One-vs-rest linear SVM

struct SvmModel {
  Tensor W;  // [K x d]
  Tensor b;  // [K]
  double C = 8.0;

  Index classes() const { return W.dim(0); }
  Index features() const { return W.dim(1); }
};

struct SvmTrainOptions {
  int epochs = 200;
};

struct SvmTrainResult {
  SvmModel model;
  /// Per class, the summed objective of the iterate after each epoch.
  std::vector<double> objective;
  /// Running minimum of `objective`; the returned model attains the last entry.
  std::vector<double> best_objective;
};

/// Primal objective of one binary problem: 0.5 |w|^2 + C sum_i max(0, 1 - y_i (w.x_i + b)).
double svm_binary_objective(const Eigen::Ref<const Vec>& w, Real b, const MatRef& x, std::span<const Real> y,
                            double C);
/// Summed one-vs-rest objective of a model.
double svm_objective(const SvmModel& m, const MatRef& x, std::span<const int> labels);
/// Gradient of `svm_objective` w.r.t. (W, b), valid where no margin is exactly 1.
std::pair<Mat, Vec> svm_objective_gradient(const SvmModel& m, const MatRef& x, std::span<const int> labels);

/// Per class: full-batch subgradient steps on w with step 1/(lambda t),
/// lambda = 1/(C n), from w = 0; after every step the unregularized bias is
/// set to its exact minimizer for the current w. Deterministic.
SvmTrainResult svm_train(const MatRef& features, std::span<const int> labels, int classes, double C,
                         const SvmTrainOptions& options = {});

struct SvmPrediction {
  std::vector<int> labels;
  Mat margins;  // [n x K]
};

/// Argmax over class margins; ties go to the lower class index.
SvmPrediction svm_predict(const SvmModel& m, const MatRef& features);

/// Index of the row maximum, first index on ties.
int argmax_row(const Eigen::Ref<const RowVec<Real>>& row);

}  // namespace twostream
