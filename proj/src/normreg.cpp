#include "twostream/normreg.hpp"

#include <cmath>

namespace twostream {

BatchNormParams BatchNormParams::make(Index features, double epsilon, double momentum) {
  if (!(epsilon > 0)) throw InputError("batchnorm epsilon must be positive");
  if (!(momentum > 0 && momentum < 1)) throw InputError("batchnorm momentum must lie in (0, 1)");
  return {Tensor::constant({features}, 1), Tensor({features}), Tensor({features}), Tensor::constant({features}, 1),
          epsilon, momentum};
}

Mat batchnorm_infer(const BatchNormParams& p, const MatRef& x) {
  if (x.cols() != p.features()) throw DimensionError("batchnorm: feature count mismatch");
  const Vec scale = (p.gamma.vector().array() / (p.running_var.vector().array() + p.epsilon).sqrt()).matrix();
  Mat y = (x.rowwise() - p.running_mean.vector().transpose()).array().rowwise() * scale.transpose().array();
  y.rowwise() += p.beta.vector().transpose();
  return y;
}

BatchNormOutput batchnorm_forward(BatchNormParams& p, const MatRef& x, Mode mode) {
  if (mode == Mode::Inference) return {batchnorm_infer(p, x), {Mode::Inference, Mat(), Vec(), Vec()}};
  if (x.cols() != p.features()) throw DimensionError("batchnorm: feature count mismatch");
  const Index n = x.rows();
  if (n < 2) throw InputError("batchnorm: train mode needs at least 2 samples, got " + std::to_string(n));

  const Vec mean = x.colwise().mean().transpose();
  const Mat centered = x.rowwise() - mean.transpose();
  const Vec var = centered.array().square().colwise().mean().transpose();
  BatchNormCache cache{Mode::Train, Mat(), (var.array() + p.epsilon).rsqrt(), p.gamma.vector()};
  cache.xhat = centered.array().rowwise() * cache.inv_std.transpose().array();
  Mat y = cache.xhat.array().rowwise() * cache.gamma.transpose().array();
  y.rowwise() += p.beta.vector().transpose();

  const Real m = Real(p.momentum);
  p.running_mean.vector() = m * p.running_mean.vector() + (1 - m) * mean;
  p.running_var.vector() = m * p.running_var.vector() + (1 - m) * var;
  return {std::move(y), std::move(cache)};
}

BatchNormGrads batchnorm_backward(const BatchNormCache& cache, const MatRef& dy) {
  if (cache.mode != Mode::Train) throw ContractError("batchnorm_backward needs a train-mode cache");
  if (dy.rows() != cache.xhat.rows() || dy.cols() != cache.xhat.cols()) {
    throw DimensionError("batchnorm_backward: gradient shape mismatch");
  }
  const Real n = Real(dy.rows());
  BatchNormGrads g;
  g.dbeta = dy.colwise().sum().transpose();
  g.dgamma = dy.cwiseProduct(cache.xhat).colwise().sum().transpose();
  // dx = gamma/sigma * (dy - mean(dy) - xhat * mean(dy * xhat))
  const Mat dxhat = dy.array().rowwise() * cache.gamma.transpose().array();
  const RowVec<Real> mean_dxhat = dxhat.colwise().mean();
  const RowVec<Real> mean_dxhat_xhat = dxhat.cwiseProduct(cache.xhat).colwise().sum() / n;
  Mat inner = dxhat.rowwise() - mean_dxhat;
  inner -= (cache.xhat.array().rowwise() * mean_dxhat_xhat.array()).matrix();
  g.dx = inner.array().rowwise() * cache.inv_std.transpose().array();
  return g;
}

DropoutOutput dropout(const MatRef& x, const DropoutConfig& cfg, Rng& rng) {
  if (!(cfg.keep_prob > 0 && cfg.keep_prob <= 1)) throw InputError("dropout keep_prob must lie in (0, 1]");
  if (cfg.mode == Mode::Inference || cfg.keep_prob == 1.0) return {Mat(x), Mat()};
  const Real scale = Real(1.0 / cfg.keep_prob);
  Mat mask(x.rows(), x.cols());
  for (Index r = 0; r < mask.rows(); ++r) {
    for (Index c = 0; c < mask.cols(); ++c) mask(r, c) = rng.bernoulli(cfg.keep_prob) ? scale : Real(0);
  }
  Mat y = x.cwiseProduct(mask);
  return {std::move(y), std::move(mask)};
}

Mat dropout_backward(const MatRef& mask, const MatRef& dy) {
  if (mask.size() == 0) return dy;
  if (mask.rows() != dy.rows() || mask.cols() != dy.cols()) throw DimensionError("dropout_backward: shape mismatch");
  return dy.cwiseProduct(mask);
}

}  // namespace twostream
