#pragma once

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "twostream/tensor.hpp"

namespace twostream {

/// A trainable tensor and the gradient buffer that backward fills for it.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

struct RmspropConfig {
  double learning_rate = 0.001;
  double decay = 0.9;
  double momentum = 0.0;
  double epsilon = 1e-8;
};

/// acc <- decay*acc + (1-decay)*g^2;  step = lr*g/sqrt(acc+eps);
/// with momentum m > 0 the step is accumulated as mom <- m*mom + step.
class Rmsprop {
 public:
  explicit Rmsprop(RmspropConfig cfg = {});

  void step(std::span<const ParamRef> params);
  const RmspropConfig& config() const { return cfg_; }
  const std::vector<Vec>& accumulators() const { return acc_; }

 private:
  RmspropConfig cfg_;
  std::vector<Vec> acc_;
  std::vector<Vec> mom_;
};

struct SgdHalvingConfig {
  double learning_rate = 0.0001;
  int patience = 3;
};

/// Plain SGD whose learning rate halves after `patience` consecutive
/// validation reports without a strict improvement on the best so far.
class SgdHalving {
 public:
  explicit SgdHalving(SgdHalvingConfig cfg = {});

  void step(std::span<const ParamRef> params);
  /// Feed one validation metric (higher is better). Returns true if the rate halved.
  bool observe(double metric);
  double learning_rate() const { return lr_; }

 private:
  double lr_;
  int patience_;
  double best_ = -std::numeric_limits<double>::infinity();
  int stale_ = 0;
};

}  // namespace twostream
