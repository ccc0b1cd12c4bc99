#include "twostream/harness/skeleton_model.hpp"

#include <charconv>
#include <regex>

namespace twostream {
namespace {

const std::vector<std::string> kVariants = {"RNN1",          "LSTM1",         "LSTM1-BN",
                                            "LSTM1-BN-DP",   "GRU1-BN-DP",    "BI-GRU1-BN-DP",
                                            "BI-GRU2-BN-DP", "BI-GRU2-BN-DP-H", "C3D",
                                            "C3D-DESK"};

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string layer_prefix(std::size_t l, bool backward) {
  return "layer" + std::to_string(l) + (backward ? ".bwd." : ".fwd.");
}

}  // namespace

LadderLayout ladder_layout(const std::string& name) {
  static const std::regex grammar(R"((BI-)?(RNN|LSTM|GRU)([1-9])(-BN)?(-DP)?(-H)?)");
  std::smatch m;
  if (!std::regex_match(name, m, grammar)) throw InputError("unknown model variant '" + name + "'");
  LadderLayout out;
  out.bidirectional = m[1].matched;
  out.cell = m[2] == "RNN" ? CellKind::Rnn : m[2] == "LSTM" ? CellKind::Lstm : CellKind::Gru;
  out.layers = std::stoi(m[3]);
  out.batchnorm = m[4].matched;
  out.dropout = m[5].matched;
  out.hidden_fc = m[6].matched;
  return out;
}

bool is_cnn_variant(const std::string& name) { return name == "C3D" || name == "C3D-DESK"; }

bool is_known_variant(const std::string& name) {
  return std::find(kVariants.begin(), kVariants.end(), name) != kVariants.end();
}

// ---------------------------------------------------------------------------

SkeletonModel::SkeletonModel(const SkeletonModelSpec& spec) : spec_(spec), layout_(ladder_layout(spec.name)) {
  if (spec_.input < 1 || spec_.hidden < 1) throw InputError("skeleton model: input and hidden widths must be positive");
  if (spec_.classes < 2) throw InputError("skeleton model: need at least two classes");
  if (!(spec_.keep_prob > 0 && spec_.keep_prob <= 1)) throw InputError("skeleton model: keep_prob must be in (0, 1]");
}

SkeletonModel::SkeletonModel(const SkeletonModelSpec& spec, Rng& rng) : SkeletonModel(spec) {
  Index in = spec_.input;
  for (int l = 0; l < layout_.layers; ++l) {
    RecurrentLayer layer{make_cell(layout_.cell, in, spec_.hidden, rng), std::nullopt};
    if (layout_.bidirectional) layer.backward = make_cell(layout_.cell, in, spec_.hidden, rng);
    for (auto* cell : {&layer.forward, layer.backward ? &*layer.backward : nullptr}) {
      if (auto* gru = cell ? std::get_if<GruCellParams>(cell) : nullptr) {
        gru->b_gates.vector().head(spec_.hidden).setConstant(Real(spec_.gru_update_bias));
      }
    }
    in = layer.output_size();
    layers_.push_back(std::move(layer));
  }
  if (layout_.batchnorm) bn_ = BatchNormParams::make(in, 1e-5, spec_.bn_momentum);
  if (layout_.hidden_fc) {
    hidden_ = DenseParams::glorot(in, in, rng, DenseActivation::Relu);
  }
  output_ = DenseParams::glorot(in, spec_.classes, rng);

  for (const auto& layer : layers_) {
    RecurrentLayer g{zeros_like(layer.forward), std::nullopt};
    if (layer.backward) g.backward = zeros_like(*layer.backward);
    layer_grads_.push_back(std::move(g));
  }
  if (bn_) {
    gamma_grad_ = Tensor({in});
    beta_grad_ = Tensor({in});
  }
  if (hidden_) hidden_grad_ = DenseParams::zeros(in, in, DenseActivation::Relu);
  output_grad_ = DenseParams::zeros(in, spec_.classes);
}

Index SkeletonModel::feature_width() const {
  if (!hidden_) throw InputError("model " + spec_.name + " has no rnn_fc feature tap (needs a -H variant)");
  return hidden_->outputs();
}

Index SkeletonModel::recurrent_parameter_count() const {
  Index total = 0;
  for (const auto& layer : layers_) total += layer.parameter_count();
  return total;
}

Index SkeletonModel::parameter_count() const {
  Index total = recurrent_parameter_count() + output_.W.size() + output_.b.size();
  if (bn_) total += 2 * bn_->features();
  if (hidden_) total += hidden_->W.size() + hidden_->b.size();
  return total;
}

SkeletonModel::Output SkeletonModel::forward(const SequenceBatch& batch, Mode mode, Rng& rng) {
  if (batch.features() != spec_.input) {
    throw DimensionError("skeleton model expects " + std::to_string(spec_.input) + " features per step, got " +
                         std::to_string(batch.features()));
  }
  Output out;
  out.cache.layers = stack(layers_, batch);
  Mat h = out.cache.layers.back().last_valid;
  if (bn_) {
    if (mode == Mode::Train) {
      auto y = batchnorm_forward(*bn_, h, Mode::Train);
      h = std::move(y.y);
      out.cache.bn = std::move(y.cache);
    } else {
      h = batchnorm_infer(*bn_, h);
    }
  }
  if (layout_.dropout && mode == Mode::Train) {
    auto y = dropout(h, {spec_.keep_prob, Mode::Train}, rng);
    h = std::move(y.y);
    out.cache.dropout_mask = std::move(y.mask);
  }
  if (hidden_) {
    auto y = dense_forward(*hidden_, h);
    out.features = y.y;
    h = std::move(y.y);
    out.cache.hidden = std::move(y.cache);
  }
  auto logits = dense_forward(output_, h);
  out.logits = std::move(logits.y);
  out.cache.output = std::move(logits.cache);
  return out;
}

void SkeletonModel::update_statistics(const SequenceBatch& batch) {
  if (!bn_ || batch.batch() < 2) return;
  const auto layers = stack(layers_, batch);
  batchnorm_forward(*bn_, layers.back().last_valid, Mode::Train);
}

void SkeletonModel::backward(const Cache& cache, const MatRef& grad_logits) {
  auto g_out = dense_backward(output_, cache.output, grad_logits);
  output_grad_.W = std::move(g_out.W);
  output_grad_.b = std::move(g_out.b);
  Mat g = std::move(g_out.dx);
  if (hidden_) {
    auto g_hidden = dense_backward(*hidden_, *cache.hidden, g);
    hidden_grad_->W = std::move(g_hidden.W);
    hidden_grad_->b = std::move(g_hidden.b);
    g = std::move(g_hidden.dx);
  }
  if (cache.dropout_mask.size() > 0) g = dropout_backward(cache.dropout_mask, g);
  if (bn_) {
    if (!cache.bn) throw ContractError("skeleton model: backward needs a train-mode forward");
    auto g_bn = batchnorm_backward(*cache.bn, g);
    gamma_grad_.vector() = g_bn.dgamma;
    beta_grad_.vector() = g_bn.dbeta;
    g = std::move(g_bn.dx);
  }
  auto grads = stack_backward(layers_, cache.layers, g);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layer_grads_[l].forward = std::move(grads[l].forward);
    if (grads[l].backward) layer_grads_[l].backward = std::move(*grads[l].backward);
  }
}

std::vector<ParamRef> SkeletonModel::params() {
  std::vector<ParamRef> out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    auto add_cell = [&](CellParams& value, CellParams& grad, bool backward) {
      auto v = cell_tensors(value);
      auto g = cell_tensors(grad);
      for (std::size_t k = 0; k < v.size(); ++k) {
        out.push_back({layer_prefix(l, backward) + v[k].first, v[k].second, g[k].second});
      }
    };
    add_cell(layers_[l].forward, layer_grads_[l].forward, false);
    if (layers_[l].backward) add_cell(*layers_[l].backward, *layer_grads_[l].backward, true);
  }
  if (bn_) {
    out.push_back({"bn.gamma", &bn_->gamma, &gamma_grad_});
    out.push_back({"bn.beta", &bn_->beta, &beta_grad_});
  }
  if (hidden_) {
    out.push_back({"fc_hidden.W", &hidden_->W, &hidden_grad_->W});
    out.push_back({"fc_hidden.b", &hidden_->b, &hidden_grad_->b});
  }
  out.push_back({"fc_out.W", &output_.W, &output_grad_.W});
  out.push_back({"fc_out.b", &output_.b, &output_grad_.b});
  return out;
}

void SkeletonModel::save(Checkpoint& ckpt) const {
  ckpt.meta["kind"] = "skeleton";
  ckpt.meta["model"] = spec_.name;
  ckpt.meta["input"] = std::to_string(spec_.input);
  ckpt.meta["hidden"] = std::to_string(spec_.hidden);
  ckpt.meta["classes"] = std::to_string(spec_.classes);
  ckpt.meta["keep_prob"] = fmt(spec_.keep_prob);
  ckpt.meta["bn_momentum"] = fmt(spec_.bn_momentum);
  for (const auto& p : const_cast<SkeletonModel*>(this)->params()) ckpt.add(p.name, *p.value);
  if (bn_) {
    ckpt.add("bn.running_mean", bn_->running_mean);
    ckpt.add("bn.running_var", bn_->running_var);
  }
}

SkeletonModel SkeletonModel::load(const Checkpoint& ckpt) {
  if (ckpt.meta_at("kind") != "skeleton") throw FormatError("checkpoint does not hold a skeleton model");
  SkeletonModelSpec spec;
  spec.name = ckpt.meta_at("model");
  spec.input = std::stoll(ckpt.meta_at("input"));
  spec.hidden = std::stoll(ckpt.meta_at("hidden"));
  spec.classes = std::stoi(ckpt.meta_at("classes"));
  spec.keep_prob = std::stod(ckpt.meta_at("keep_prob"));
  spec.bn_momentum = std::stod(ckpt.meta_at("bn_momentum"));
  Rng rng(0);
  SkeletonModel model(spec, rng);
  for (const auto& p : model.params()) {
    const Tensor& t = ckpt.at(p.name);
    if (t.shape() != p.value->shape()) {
      throw FormatError("skeleton checkpoint: tensor '" + p.name + "' has shape " + shape_string(t.shape()) +
                        ", expected " + shape_string(p.value->shape()));
    }
    *p.value = t;
  }
  if (model.bn_) {
    model.bn_->running_mean = ckpt.at("bn.running_mean");
    model.bn_->running_var = ckpt.at("bn.running_var");
  }
  return model;
}

}  // namespace twostream
