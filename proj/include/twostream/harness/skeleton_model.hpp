#pragma once

#include <optional>
#include <string>
#include <vector>

#include "twostream/checkpoint.hpp"
#include "twostream/heads.hpp"
#include "twostream/normreg.hpp"
#include "twostream/optim.hpp"
#include "twostream/recurrent.hpp"

namespace twostream {

/// Layer recipe of one recurrent ladder variant.
struct LadderLayout {
  CellKind cell = CellKind::Rnn;
  int layers = 1;
  bool bidirectional = false;
  bool batchnorm = false;
  bool dropout = false;
  bool hidden_fc = false;  // the -H variants: ReLU layer of width 2*hidden before the softmax
};

/// Parses "RNN1", "LSTM1-BN", "BI-GRU2-BN-DP-H", ... Throws InputError for unknown names.
LadderLayout ladder_layout(const std::string& name);
bool is_cnn_variant(const std::string& name);
bool is_known_variant(const std::string& name);

struct SkeletonModelSpec {
  std::string name = "LSTM1";
  Index input = 0;
  Index hidden = 32;
  int classes = 0;
  double keep_prob = 0.75;
  double bn_momentum = 0.99;
  double gru_update_bias = 0.0;  // initial update-gate bias of GRU cells
};

/// Recurrent stack -> last valid state -> [BN] -> [dropout] -> [FC ReLU] -> FC -> softmax.
class SkeletonModel {
 public:
  SkeletonModel(const SkeletonModelSpec& spec, Rng& rng);

  struct Cache {
    std::vector<LayerResult> layers;
    std::optional<BatchNormCache> bn;
    Mat dropout_mask;
    std::optional<DenseCache> hidden;
    DenseCache output;
  };

  struct Output {
    Mat logits;
    Mat features;  // hidden FC activations; empty without a hidden layer
    Cache cache;
  };

  /// Train mode updates the BN running statistics and draws dropout masks from `rng`.
  Output forward(const SequenceBatch& batch, Mode mode, Rng& rng);
  /// One train-mode BN running-stat update from the batch; weights are untouched.
  void update_statistics(const SequenceBatch& batch);
  /// Writes parameter gradients into the buffers exposed by params().
  void backward(const Cache& cache, const MatRef& grad_logits);

  std::vector<ParamRef> params();
  const SkeletonModelSpec& spec() const { return spec_; }
  const LadderLayout& layout() const { return layout_; }
  const std::vector<RecurrentLayer>& layers() const { return layers_; }
  bool has_feature_tap() const { return layout_.hidden_fc; }
  Index feature_width() const;
  Index parameter_count() const;
  Index recurrent_parameter_count() const;

  void save(Checkpoint& ckpt) const;
  static SkeletonModel load(const Checkpoint& ckpt);

 private:
  explicit SkeletonModel(const SkeletonModelSpec& spec);

  SkeletonModelSpec spec_;
  LadderLayout layout_;
  std::vector<RecurrentLayer> layers_;
  std::optional<BatchNormParams> bn_;
  std::optional<DenseParams> hidden_;
  DenseParams output_;

  std::vector<RecurrentLayer> layer_grads_;
  Tensor gamma_grad_, beta_grad_;
  std::optional<DenseParams> hidden_grad_;
  DenseParams output_grad_;
};

}  // namespace twostream
