#include "twostream/optim.hpp"

namespace twostream {
namespace {

void check_param(const ParamRef& p) {
  if (p.value->shape() != p.grad->shape()) {
    throw DimensionError("optimizer: parameter '" + p.name + "' " + shape_string(p.value->shape()) +
                         " has gradient " + shape_string(p.grad->shape()));
  }
}

}  // namespace

Rmsprop::Rmsprop(RmspropConfig cfg) : cfg_(cfg) {
  if (!(cfg.learning_rate > 0)) throw InputError("rmsprop: learning rate must be positive");
  if (!(cfg.decay > 0 && cfg.decay < 1)) throw InputError("rmsprop: decay must lie in (0, 1)");
  if (cfg.momentum < 0 || cfg.momentum >= 1) throw InputError("rmsprop: momentum must lie in [0, 1)");
}

void Rmsprop::step(std::span<const ParamRef> params) {
  if (acc_.empty()) {
    for (const auto& p : params) {
      acc_.push_back(Vec::Zero(p.value->size()));
      mom_.push_back(Vec::Zero(cfg_.momentum > 0 ? p.value->size() : 0));
    }
  }
  if (acc_.size() != params.size()) throw DimensionError("rmsprop: parameter list changed between steps");
  const Real decay = Real(cfg_.decay), lr = Real(cfg_.learning_rate), eps = Real(cfg_.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    check_param(p);
    if (acc_[k].size() != p.value->size()) throw DimensionError("rmsprop: parameter '" + p.name + "' changed size");
    const auto g = p.grad->vector().array();
    acc_[k].array() = decay * acc_[k].array() + (1 - decay) * g.square();
    if (cfg_.momentum > 0) {
      mom_[k].array() = Real(cfg_.momentum) * mom_[k].array() + lr * g / (acc_[k].array() + eps).sqrt();
      p.value->vector() -= mom_[k];
    } else {
      p.value->vector().array() -= lr * g / (acc_[k].array() + eps).sqrt();
    }
  }
}

SgdHalving::SgdHalving(SgdHalvingConfig cfg) : lr_(cfg.learning_rate), patience_(cfg.patience) {
  if (!(cfg.learning_rate > 0)) throw InputError("sgd: learning rate must be positive");
  if (cfg.patience < 1) throw InputError("sgd: patience must be at least 1");
}

void SgdHalving::step(std::span<const ParamRef> params) {
  for (const auto& p : params) {
    check_param(p);
    p.value->vector() -= Real(lr_) * p.grad->vector();
  }
}

bool SgdHalving::observe(double metric) {
  if (metric > best_) {
    best_ = metric;
    stale_ = 0;
    return false;
  }
  if (++stale_ >= patience_) {
    lr_ *= 0.5;
    stale_ = 0;
    return true;
  }
  return false;
}

}  // namespace twostream
