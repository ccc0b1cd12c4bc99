#pragma once

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "twostream/rng.hpp"
#include "twostream/tensor.hpp"

namespace twostream {

enum class CellKind { Rnn, Lstm, Gru };
enum class Activation { Tanh, Sigmoid };
enum class Direction { Forward, Backward };

/// Vanilla recurrent cell: h = act(W [x; h_prev] + b).
struct RnnCellParams {
  Tensor W;  // [d x (i+d)], input columns first
  Tensor b;  // [d]
  Activation activation = Activation::Tanh;

  static RnnCellParams zeros(Index input, Index hidden, Activation act = Activation::Tanh);
  static RnnCellParams glorot(Index input, Index hidden, Rng& rng, Activation act = Activation::Tanh);
};

/// LSTM cell. Row blocks of W and b are ordered input, forget, output, candidate.
struct LstmCellParams {
  Tensor W;  // [4d x (i+d)]
  Tensor b;  // [4d]

  static LstmCellParams zeros(Index input, Index hidden);
  /// Glorot weights, zero biases except the forget block at 1.0.
  static LstmCellParams glorot(Index input, Index hidden, Rng& rng);
};

/// GRU cell. Gate rows are ordered update (z), reset (r).
struct GruCellParams {
  Tensor W_gates;  // [2d x (i+d)]
  Tensor W_cand;   // [d x (i+d)], applied to [x; r*h_prev]
  Tensor b_gates;  // [2d]
  Tensor b_cand;   // [d]

  static GruCellParams zeros(Index input, Index hidden);
  static GruCellParams glorot(Index input, Index hidden, Rng& rng);
};

using CellParams = std::variant<RnnCellParams, LstmCellParams, GruCellParams>;

CellKind cell_kind(const CellParams& cell);
Index input_size(const CellParams& cell);
Index hidden_size(const CellParams& cell);
Index parameter_count(const CellParams& cell);
/// Same kind and shapes, every tensor zero. Used as a gradient accumulator.
CellParams zeros_like(const CellParams& cell);
CellParams make_cell(CellKind kind, Index input, Index hidden, Rng& rng);

/// Named views of a cell's tensors in their serialized order.
std::vector<std::pair<std::string, Tensor*>> cell_tensors(CellParams& cell);
std::vector<std::pair<std::string, const Tensor*>> cell_tensors(const CellParams& cell);

// ---------------------------------------------------------------------------
// Single time step. Inputs are [n x i] and [n x d] with one sample per row.

struct RnnStepCache {
  Mat xh;  // [x, h_prev]
  Mat h;
};

struct LstmStepCache {
  Mat xh;
  Mat gates;  // activated i, f, o, candidate blocks
  Mat c_prev;
  Mat tanh_c;
};

struct GruStepCache {
  Mat xh;
  Mat z, r;
  Mat xrh;  // [x, r*h_prev]
  Mat cand;
  Mat h_prev;
};

using StepCache = std::variant<RnnStepCache, LstmStepCache, GruStepCache>;

struct StepResult {
  Mat h;
  Mat c;  // LSTM only
  StepCache cache;
};

struct StepGrads {
  Mat dx;
  Mat dh_prev;
  Mat dc_prev;  // LSTM only
};

StepResult rnn_cell_forward(const RnnCellParams& p, const MatRef& x, const MatRef& h_prev);
StepResult lstm_cell_forward(const LstmCellParams& p, const MatRef& x, const MatRef& h_prev,
                             const MatRef& c_prev);
StepResult gru_cell_forward(const GruCellParams& p, const MatRef& x, const MatRef& h_prev);

/// Dispatches on the cell kind; `c_prev` is ignored for non-LSTM cells.
StepResult cell_forward(const CellParams& cell, const MatRef& x, const MatRef& h_prev, const MatRef& c_prev);

/// Accumulates parameter gradients into `grads` (same kind as `cell`) and
/// returns input/state gradients. `dc` is ignored for non-LSTM cells.
StepGrads cell_backward(const CellParams& cell, const StepCache& cache, const MatRef& dh, const MatRef& dc,
                        CellParams& grads);

// ---------------------------------------------------------------------------
// Sequences.

/// Zero-padded batch [n x T x i] with per-sample true lengths.
struct SequenceBatch {
  Tensor data;
  std::vector<Index> lengths;

  Index batch() const { return data.dim(0); }
  Index steps() const { return data.dim(1); }
  Index features() const { return data.dim(2); }
  /// Throws DimensionError/InputError if shape or lengths are inconsistent.
  void validate() const;
};

struct UnrollCache {
  Direction direction = Direction::Forward;
  Index batch = 0, steps = 0, input = 0;
  std::vector<Index> lengths;
  std::vector<std::vector<Index>> active;  // samples still running at each step
  std::vector<StepCache> cells;
};

struct UnrollResult {
  Tensor outputs;   // [n x T x d], zero at padded positions
  Mat last_valid;   // state after the final step each sample actually ran
  UnrollCache cache;
};

/// Runs the cell over time from a zero state. Each sample runs exactly its
/// true length; in the backward direction it starts at its own last valid
/// step, so padding never enters the recurrence.
UnrollResult unroll(const CellParams& cell, const SequenceBatch& batch, Direction direction);

struct UnrollGrads {
  CellParams params;
  Tensor input;  // [n x T x i], zero at padded positions
};

/// Backpropagation through time. Either upstream gradient may be empty
/// (zero-sized), meaning zero.
UnrollGrads bptt_backward(const CellParams& cell, const UnrollCache& cache, const Tensor& grad_outputs,
                          const MatRef& grad_last_valid);

// ---------------------------------------------------------------------------
// Layers and stacks.

struct RecurrentLayer {
  CellParams forward;
  std::optional<CellParams> backward;  // present for bidirectional layers

  bool bidirectional() const { return backward.has_value(); }
  Index input_size() const { return twostream::input_size(forward); }
  Index output_size() const;
  Index parameter_count() const;
};

struct LayerResult {
  Tensor outputs;  // [n x T x d] or [n x T x 2d], forward half first
  Mat last_valid;  // [n x d] or [n x 2d]
  UnrollCache forward_cache;
  std::optional<UnrollCache> backward_cache;
};

struct LayerGrads {
  CellParams forward;
  std::optional<CellParams> backward;
  Tensor input;
};

LayerResult bidirectional(const CellParams& forward, const CellParams& backward, const SequenceBatch& batch);
LayerResult run_layer(const RecurrentLayer& layer, const SequenceBatch& batch);
LayerGrads layer_backward(const RecurrentLayer& layer, const LayerResult& result, const Tensor& grad_outputs,
                          const MatRef& grad_last_valid);

/// Layer l consumes the full output sequence of layer l-1.
std::vector<LayerResult> stack(std::span<const RecurrentLayer> layers, const SequenceBatch& batch);
/// Gradient enters through the top layer's last_valid only.
std::vector<LayerGrads> stack_backward(std::span<const RecurrentLayer> layers,
                                       const std::vector<LayerResult>& results, const MatRef& grad_last_valid);

/// Reverses each sample over its true length; padding stays at the tail.
Tensor reverse_sequences(const Tensor& data, std::span<const Index> lengths);

}  // namespace twostream
