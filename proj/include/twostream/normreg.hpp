#pragma once

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

enum class Mode { Train, Inference };

/// Per-feature batch normalization over the sample axis.
struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  double epsilon = 1e-5;
  double momentum = 0.99;  // running <- momentum * running + (1 - momentum) * batch

  /// gamma = 1, beta = 0, running mean 0, running variance 1.
  static BatchNormParams make(Index features, double epsilon = 1e-5, double momentum = 0.99);
  Index features() const { return gamma.size(); }
};

struct BatchNormCache {
  Mode mode = Mode::Inference;
  Mat xhat;
  Vec inv_std;
  Vec gamma;
};

struct BatchNormOutput {
  Mat y;
  BatchNormCache cache;
};

/// Train mode uses biased batch statistics (n >= 2) and updates the running
/// averages; inference mode is a fixed affine map of the running statistics.
BatchNormOutput batchnorm_forward(BatchNormParams& p, const MatRef& x, Mode mode);
/// Inference only; never touches the parameters.
Mat batchnorm_infer(const BatchNormParams& p, const MatRef& x);

struct BatchNormGrads {
  Mat dx;
  Vec dgamma;
  Vec dbeta;
};

/// Exact gradients through the batch statistics. Requires a train-mode cache.
BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const MatRef& dy);

struct DropoutConfig {
  double keep_prob = 0.75;
  Mode mode = Mode::Train;
};

struct DropoutOutput {
  Mat y;
  Mat mask;  // 0 or 1/keep_prob per entry; empty at inference
};

/// Inverted dropout: survivors are scaled by 1/keep_prob so inference is identity.
DropoutOutput dropout(const MatRef& x, const DropoutConfig& cfg, Rng& rng);
Mat dropout_backward(const MatRef& mask, const MatRef& dy);

}  // namespace twostream
