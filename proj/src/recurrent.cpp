#include "twostream/recurrent.hpp"

#include "twostream/init.hpp"

namespace twostream {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Mat sigmoid_of(const Mat& a) {
  return a.unaryExpr([](Real v) { return sigmoid(v); });
}

Mat join_columns(const MatRef& left, const MatRef& right) {
  Mat out(left.rows(), left.cols() + right.cols());
  out << left, right;
  return out;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

void check_step_shapes(Index input, Index hidden, const MatRef& x, const MatRef& h_prev) {
  require(x.cols() == input, "cell input has " + std::to_string(x.cols()) + " features, cell expects " +
                                 std::to_string(input));
  require(h_prev.cols() == hidden && h_prev.rows() == x.rows(),
          "cell state shape [" + std::to_string(h_prev.rows()) + "x" + std::to_string(h_prev.cols()) +
              "] does not match [" + std::to_string(x.rows()) + "x" + std::to_string(hidden) + "]");
}

Index hidden_of(const Tensor& W, Index blocks) { return W.dim(0) / blocks; }
Index input_of(const Tensor& W, Index blocks) { return W.dim(1) - W.dim(0) / blocks; }

}  // namespace

// ---------------------------------------------------------------------------
// Parameter construction

RnnCellParams RnnCellParams::zeros(Index input, Index hidden, Activation act) {
  return {Tensor({hidden, input + hidden}), Tensor({hidden}), act};
}

RnnCellParams RnnCellParams::glorot(Index input, Index hidden, Rng& rng, Activation act) {
  auto p = zeros(input, hidden, act);
  glorot_fill(p.W, input + hidden, hidden, rng);
  return p;
}

LstmCellParams LstmCellParams::zeros(Index input, Index hidden) {
  return {Tensor({4 * hidden, input + hidden}), Tensor({4 * hidden})};
}

LstmCellParams LstmCellParams::glorot(Index input, Index hidden, Rng& rng) {
  auto p = zeros(input, hidden);
  glorot_fill(p.W, input + hidden, hidden, rng);
  p.b.vector().segment(hidden, hidden).setOnes();
  return p;
}

GruCellParams GruCellParams::zeros(Index input, Index hidden) {
  return {Tensor({2 * hidden, input + hidden}), Tensor({hidden, input + hidden}), Tensor({2 * hidden}),
          Tensor({hidden})};
}

GruCellParams GruCellParams::glorot(Index input, Index hidden, Rng& rng) {
  auto p = zeros(input, hidden);
  glorot_fill(p.W_gates, input + hidden, hidden, rng);
  glorot_fill(p.W_cand, input + hidden, hidden, rng);
  return p;
}

CellKind cell_kind(const CellParams& cell) {
  return std::visit(Overloaded{[](const RnnCellParams&) { return CellKind::Rnn; },
                               [](const LstmCellParams&) { return CellKind::Lstm; },
                               [](const GruCellParams&) { return CellKind::Gru; }},
                    cell);
}

Index hidden_size(const CellParams& cell) {
  return std::visit(Overloaded{[](const RnnCellParams& p) { return hidden_of(p.W, 1); },
                               [](const LstmCellParams& p) { return hidden_of(p.W, 4); },
                               [](const GruCellParams& p) { return hidden_of(p.W_cand, 1); }},
                    cell);
}

Index input_size(const CellParams& cell) {
  return std::visit(Overloaded{[](const RnnCellParams& p) { return input_of(p.W, 1); },
                               [](const LstmCellParams& p) { return input_of(p.W, 4); },
                               [](const GruCellParams& p) { return input_of(p.W_cand, 1); }},
                    cell);
}

Index parameter_count(const CellParams& cell) {
  Index total = 0;
  for (const auto& [name, t] : cell_tensors(cell)) total += t->size();
  return total;
}

CellParams zeros_like(const CellParams& cell) {
  const Index i = input_size(cell), d = hidden_size(cell);
  return std::visit(Overloaded{[&](const RnnCellParams& p) -> CellParams {
                                 return RnnCellParams::zeros(i, d, p.activation);
                               },
                               [&](const LstmCellParams&) -> CellParams { return LstmCellParams::zeros(i, d); },
                               [&](const GruCellParams&) -> CellParams { return GruCellParams::zeros(i, d); }},
                    cell);
}

CellParams make_cell(CellKind kind, Index input, Index hidden, Rng& rng) {
  switch (kind) {
    case CellKind::Rnn: return RnnCellParams::glorot(input, hidden, rng);
    case CellKind::Lstm: return LstmCellParams::glorot(input, hidden, rng);
    case CellKind::Gru: return GruCellParams::glorot(input, hidden, rng);
  }
  throw InputError("unknown cell kind");
}

std::vector<std::pair<std::string, Tensor*>> cell_tensors(CellParams& cell) {
  return std::visit(
      Overloaded{[](RnnCellParams& p) -> std::vector<std::pair<std::string, Tensor*>> {
                   return {{"W", &p.W}, {"b", &p.b}};
                 },
                 [](LstmCellParams& p) -> std::vector<std::pair<std::string, Tensor*>> {
                   return {{"W", &p.W}, {"b", &p.b}};
                 },
                 [](GruCellParams& p) -> std::vector<std::pair<std::string, Tensor*>> {
                   return {{"W_gates", &p.W_gates}, {"W_cand", &p.W_cand}, {"b_gates", &p.b_gates},
                           {"b_cand", &p.b_cand}};
                 }},
      cell);
}

std::vector<std::pair<std::string, const Tensor*>> cell_tensors(const CellParams& cell) {
  auto named = cell_tensors(const_cast<CellParams&>(cell));
  return {named.begin(), named.end()};
}

// ---------------------------------------------------------------------------
// Single steps

StepResult rnn_cell_forward(const RnnCellParams& p, const MatRef& x, const MatRef& h_prev) {
  const Index d = p.W.dim(0);
  check_step_shapes(p.W.dim(1) - d, d, x, h_prev);
  RnnStepCache cache{join_columns(x, h_prev), Mat()};
  Mat a = cache.xh * p.W.matrix().transpose();
  a.rowwise() += p.b.vector().transpose();
  cache.h = p.activation == Activation::Tanh ? Mat(a.array().tanh()) : sigmoid_of(a);
  Mat h = cache.h;
  return {std::move(h), Mat(), std::move(cache)};
}

StepResult lstm_cell_forward(const LstmCellParams& p, const MatRef& x, const MatRef& h_prev,
                             const MatRef& c_prev) {
  const Index d = p.W.dim(0) / 4;
  check_step_shapes(p.W.dim(1) - d, d, x, h_prev);
  require(c_prev.rows() == x.rows() && c_prev.cols() == d, "LSTM cell state has wrong shape");
  LstmStepCache cache;
  cache.xh = join_columns(x, h_prev);
  Mat a = cache.xh * p.W.matrix().transpose();
  a.rowwise() += p.b.vector().transpose();
  cache.gates.resize(a.rows(), a.cols());
  cache.gates.leftCols(3 * d) = sigmoid_of(a.leftCols(3 * d));
  cache.gates.rightCols(d) = a.rightCols(d).array().tanh();
  const auto in = cache.gates.leftCols(d).array();
  const auto forget = cache.gates.middleCols(d, d).array();
  const auto out = cache.gates.middleCols(2 * d, d).array();
  const auto cand = cache.gates.rightCols(d).array();
  cache.c_prev = c_prev;
  Mat c = forget * c_prev.array() + in * cand;
  cache.tanh_c = c.array().tanh();
  Mat h = out * cache.tanh_c.array();
  return {std::move(h), std::move(c), std::move(cache)};
}

StepResult gru_cell_forward(const GruCellParams& p, const MatRef& x, const MatRef& h_prev) {
  const Index d = p.W_cand.dim(0);
  check_step_shapes(p.W_cand.dim(1) - d, d, x, h_prev);
  GruStepCache cache;
  cache.xh = join_columns(x, h_prev);
  Mat g = cache.xh * p.W_gates.matrix().transpose();
  g.rowwise() += p.b_gates.vector().transpose();
  cache.z = sigmoid_of(g.leftCols(d));
  cache.r = sigmoid_of(g.rightCols(d));
  cache.xrh = join_columns(x, cache.r.cwiseProduct(h_prev));
  Mat a = cache.xrh * p.W_cand.matrix().transpose();
  a.rowwise() += p.b_cand.vector().transpose();
  cache.cand = a.array().tanh();
  cache.h_prev = h_prev;
  Mat h = cache.z.array() * h_prev.array() + (1 - cache.z.array()) * cache.cand.array();
  return {std::move(h), Mat(), std::move(cache)};
}

StepResult cell_forward(const CellParams& cell, const MatRef& x, const MatRef& h_prev, const MatRef& c_prev) {
  return std::visit(Overloaded{[&](const RnnCellParams& p) { return rnn_cell_forward(p, x, h_prev); },
                               [&](const LstmCellParams& p) { return lstm_cell_forward(p, x, h_prev, c_prev); },
                               [&](const GruCellParams& p) { return gru_cell_forward(p, x, h_prev); }},
                    cell);
}

namespace {

StepGrads rnn_backward(const RnnCellParams& p, const RnnStepCache& cache, const MatRef& dh, RnnCellParams& g) {
  const Index d = p.W.dim(0);
  Mat da = p.activation == Activation::Tanh
               ? Mat(dh.array() * (1 - cache.h.array().square()))
               : Mat(dh.array() * cache.h.array() * (1 - cache.h.array()));
  g.W.matrix().noalias() += da.transpose() * cache.xh;
  g.b.vector() += da.colwise().sum().transpose();
  Mat dxh = da * p.W.matrix();
  return {dxh.leftCols(dxh.cols() - d), dxh.rightCols(d), Mat()};
}

StepGrads lstm_backward(const LstmCellParams& p, const LstmStepCache& cache, const MatRef& dh, const MatRef& dc,
                        LstmCellParams& g) {
  const Index d = p.W.dim(0) / 4;
  const auto in = cache.gates.leftCols(d).array();
  const auto forget = cache.gates.middleCols(d, d).array();
  const auto out = cache.gates.middleCols(2 * d, d).array();
  const auto cand = cache.gates.rightCols(d).array();
  const auto tc = cache.tanh_c.array();

  Mat dct = dc.array() + dh.array() * out * (1 - tc.square());
  Mat da(dh.rows(), 4 * d);
  da.leftCols(d) = dct.array() * cand * in * (1 - in);
  da.middleCols(d, d) = dct.array() * cache.c_prev.array() * forget * (1 - forget);
  da.middleCols(2 * d, d) = dh.array() * tc * out * (1 - out);
  da.rightCols(d) = dct.array() * in * (1 - cand.square());

  g.W.matrix().noalias() += da.transpose() * cache.xh;
  g.b.vector() += da.colwise().sum().transpose();
  Mat dxh = da * p.W.matrix();
  return {dxh.leftCols(dxh.cols() - d), dxh.rightCols(d), dct.array() * forget};
}

StepGrads gru_backward(const GruCellParams& p, const GruStepCache& cache, const MatRef& dh, GruCellParams& g) {
  const Index d = p.W_cand.dim(0);
  const Index i = p.W_cand.dim(1) - d;
  const auto z = cache.z.array();
  const auto r = cache.r.array();
  const auto cand = cache.cand.array();

  Mat da_cand = dh.array() * (1 - z) * (1 - cand.square());
  g.W_cand.matrix().noalias() += da_cand.transpose() * cache.xrh;
  g.b_cand.vector() += da_cand.colwise().sum().transpose();
  Mat dxrh = da_cand * p.W_cand.matrix();
  const Mat d_rh = dxrh.rightCols(d);

  Mat da_gates(dh.rows(), 2 * d);
  da_gates.leftCols(d) = dh.array() * (cache.h_prev.array() - cand) * z * (1 - z);
  da_gates.rightCols(d) = d_rh.array() * cache.h_prev.array() * r * (1 - r);
  g.W_gates.matrix().noalias() += da_gates.transpose() * cache.xh;
  g.b_gates.vector() += da_gates.colwise().sum().transpose();
  Mat dxh = da_gates * p.W_gates.matrix();

  Mat dx = dxh.leftCols(i) + dxrh.leftCols(i);
  Mat dh_prev = dxh.rightCols(d).array() + dh.array() * z + d_rh.array() * r;
  return {std::move(dx), std::move(dh_prev), Mat()};
}

}  // namespace

StepGrads cell_backward(const CellParams& cell, const StepCache& cache, const MatRef& dh, const MatRef& dc,
                        CellParams& grads) {
  if (cell.index() != cache.index() || cell.index() != grads.index()) {
    throw ContractError("cell_backward: cell, cache and gradient kinds differ");
  }
  switch (cell.index()) {
    case 0:
      return rnn_backward(std::get<0>(cell), std::get<0>(cache), dh, std::get<0>(grads));
    case 1:
      return lstm_backward(std::get<1>(cell), std::get<1>(cache), dh, dc, std::get<1>(grads));
    default:
      return gru_backward(std::get<2>(cell), std::get<2>(cache), dh, std::get<2>(grads));
  }
}

// ---------------------------------------------------------------------------
// Sequences

void SequenceBatch::validate() const {
  if (data.ndim() != 3) throw DimensionError("sequence batch must be [n x T x i], got " + shape_string(data.shape()));
  if (Index(lengths.size()) != batch()) {
    throw DimensionError("sequence batch has " + std::to_string(batch()) + " samples but " +
                         std::to_string(lengths.size()) + " lengths");
  }
  for (Index len : lengths) {
    if (len < 1 || len > steps()) {
      throw InputError("sequence length " + std::to_string(len) + " outside [1, " + std::to_string(steps()) + "]");
    }
  }
}

namespace {

// Row of the [(n*T) x features] view holding sample s at time t.
inline Index row_of(Index s, Index t, Index steps) { return s * steps + t; }

inline Index time_of(Direction dir, Index k, Index len) { return dir == Direction::Forward ? k : len - 1 - k; }

}  // namespace

UnrollResult unroll(const CellParams& cell, const SequenceBatch& batch, Direction direction) {
  batch.validate();
  const Index n = batch.batch(), T = batch.steps(), i = batch.features();
  const Index d = hidden_size(cell);
  if (i != input_size(cell)) {
    throw DimensionError("sequence has " + std::to_string(i) + " features, cell expects " +
                         std::to_string(input_size(cell)));
  }
  const bool lstm = cell_kind(cell) == CellKind::Lstm;
  const Index max_len = *std::max_element(batch.lengths.begin(), batch.lengths.end());

  UnrollResult result{Tensor({n, T, d}), Mat::Zero(n, d), {}};
  UnrollCache& cache = result.cache;
  cache.direction = direction;
  cache.batch = n;
  cache.steps = T;
  cache.input = i;
  cache.lengths = batch.lengths;

  const auto x_all = Eigen::Map<const Mat>(batch.data.data(), n * T, i);
  auto out_all = Eigen::Map<Mat>(result.outputs.data(), n * T, d);
  Mat& h_state = result.last_valid;
  Mat c_state = Mat::Zero(n, lstm ? d : 0);

  for (Index k = 0; k < max_len; ++k) {
    std::vector<Index> active;
    for (Index s = 0; s < n; ++s) {
      if (batch.lengths[s] > k) active.push_back(s);
    }
    const Index m = Index(active.size());
    Mat x(m, i), h_prev(m, d), c_prev(m, c_state.cols());
    for (Index j = 0; j < m; ++j) {
      const Index s = active[j];
      x.row(j) = x_all.row(row_of(s, time_of(direction, k, batch.lengths[s]), T));
      h_prev.row(j) = h_state.row(s);
      if (lstm) c_prev.row(j) = c_state.row(s);
    }
    StepResult step = cell_forward(cell, x, h_prev, c_prev);
    for (Index j = 0; j < m; ++j) {
      const Index s = active[j];
      h_state.row(s) = step.h.row(j);
      if (lstm) c_state.row(s) = step.c.row(j);
      out_all.row(row_of(s, time_of(direction, k, batch.lengths[s]), T)) = step.h.row(j);
    }
    cache.active.push_back(std::move(active));
    cache.cells.push_back(std::move(step.cache));
  }
  return result;
}

UnrollGrads bptt_backward(const CellParams& cell, const UnrollCache& cache, const Tensor& grad_outputs,
                          const MatRef& grad_last_valid) {
  const Index n = cache.batch, T = cache.steps, i = cache.input;
  const Index d = hidden_size(cell);
  const bool lstm = cell_kind(cell) == CellKind::Lstm;
  const bool has_seq_grad = grad_outputs.size() > 0;
  const bool has_last_grad = grad_last_valid.size() > 0;
  if (has_seq_grad && grad_outputs.shape() != Shape{n, T, d}) {
    throw DimensionError("bptt: output gradient " + shape_string(grad_outputs.shape()) + " does not match " +
                         shape_string({n, T, d}));
  }
  if (has_last_grad && (grad_last_valid.rows() != n || grad_last_valid.cols() != d)) {
    throw DimensionError("bptt: last-state gradient has wrong shape");
  }

  UnrollGrads grads{zeros_like(cell), Tensor({n, T, i})};
  auto dx_all = Eigen::Map<Mat>(grads.input.data(), n * T, i);
  const auto dy_all = Eigen::Map<const Mat>(grad_outputs.data(), has_seq_grad ? n * T : 0, d);
  Mat dh_state = has_last_grad ? Mat(grad_last_valid) : Mat(Mat::Zero(n, d));
  Mat dc_state = Mat::Zero(n, lstm ? d : 0);

  for (Index k = Index(cache.cells.size()) - 1; k >= 0; --k) {
    const auto& active = cache.active[std::size_t(k)];
    const Index m = Index(active.size());
    Mat dh(m, d), dc(m, dc_state.cols());
    for (Index j = 0; j < m; ++j) {
      const Index s = active[j];
      dh.row(j) = dh_state.row(s);
      if (has_seq_grad) dh.row(j) += dy_all.row(row_of(s, time_of(cache.direction, k, cache.lengths[s]), T));
      if (lstm) dc.row(j) = dc_state.row(s);
    }
    StepGrads step = cell_backward(cell, cache.cells[std::size_t(k)], dh, dc, grads.params);
    for (Index j = 0; j < m; ++j) {
      const Index s = active[j];
      dx_all.row(row_of(s, time_of(cache.direction, k, cache.lengths[s]), T)) = step.dx.row(j);
      dh_state.row(s) = step.dh_prev.row(j);
      if (lstm) dc_state.row(s) = step.dc_prev.row(j);
    }
  }
  return grads;
}

Tensor reverse_sequences(const Tensor& data, std::span<const Index> lengths) {
  const Index n = data.dim(0), T = data.dim(1), f = data.dim(2);
  Tensor out(data.shape());
  const auto in = Eigen::Map<const Mat>(data.data(), n * T, f);
  auto dst = Eigen::Map<Mat>(out.data(), n * T, f);
  for (Index s = 0; s < n; ++s) {
    for (Index t = 0; t < lengths[std::size_t(s)]; ++t) {
      dst.row(row_of(s, t, T)) = in.row(row_of(s, lengths[std::size_t(s)] - 1 - t, T));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layers

Index RecurrentLayer::output_size() const {
  return hidden_size(forward) * (bidirectional() ? 2 : 1);
}

Index RecurrentLayer::parameter_count() const {
  return twostream::parameter_count(forward) + (backward ? twostream::parameter_count(*backward) : 0);
}

namespace {

// [n x T x a] and [n x T x b] -> [n x T x (a+b)]
Tensor join_features(const Tensor& a, const Tensor& b) {
  const Index n = a.dim(0), T = a.dim(1);
  Tensor out({n, T, a.dim(2) + b.dim(2)});
  auto dst = Eigen::Map<Mat>(out.data(), n * T, a.dim(2) + b.dim(2));
  dst.leftCols(a.dim(2)) = Eigen::Map<const Mat>(a.data(), n * T, a.dim(2));
  dst.rightCols(b.dim(2)) = Eigen::Map<const Mat>(b.data(), n * T, b.dim(2));
  return out;
}

Tensor feature_slice(const Tensor& x, Index begin, Index count) {
  const Index n = x.dim(0), T = x.dim(1);
  Tensor out({n, T, count});
  Eigen::Map<Mat>(out.data(), n * T, count) =
      Eigen::Map<const Mat>(x.data(), n * T, x.dim(2)).middleCols(begin, count);
  return out;
}

}  // namespace

LayerResult bidirectional(const CellParams& forward, const CellParams& backward, const SequenceBatch& batch) {
  if (hidden_size(forward) != hidden_size(backward) || input_size(forward) != input_size(backward)) {
    throw DimensionError("bidirectional: forward and backward cells have different dimensions");
  }
  UnrollResult f = unroll(forward, batch, Direction::Forward);
  UnrollResult b = unroll(backward, batch, Direction::Backward);
  LayerResult out;
  out.outputs = join_features(f.outputs, b.outputs);
  out.last_valid.resize(f.last_valid.rows(), 2 * f.last_valid.cols());
  out.last_valid << f.last_valid, b.last_valid;
  out.forward_cache = std::move(f.cache);
  out.backward_cache = std::move(b.cache);
  return out;
}

LayerResult run_layer(const RecurrentLayer& layer, const SequenceBatch& batch) {
  if (layer.backward) return bidirectional(layer.forward, *layer.backward, batch);
  UnrollResult f = unroll(layer.forward, batch, Direction::Forward);
  return {std::move(f.outputs), std::move(f.last_valid), std::move(f.cache), std::nullopt};
}

LayerGrads layer_backward(const RecurrentLayer& layer, const LayerResult& result, const Tensor& grad_outputs,
                          const MatRef& grad_last_valid) {
  if (!layer.backward) {
    UnrollGrads g = bptt_backward(layer.forward, result.forward_cache, grad_outputs, grad_last_valid);
    return {std::move(g.params), std::nullopt, std::move(g.input)};
  }
  const Index d = hidden_size(layer.forward);
  const bool has_seq = grad_outputs.size() > 0;
  const bool has_last = grad_last_valid.size() > 0;
  const Tensor empty;
  const Tensor gf = has_seq ? feature_slice(grad_outputs, 0, d) : empty;
  const Tensor gb = has_seq ? feature_slice(grad_outputs, d, d) : empty;
  const Mat lf = has_last ? Mat(grad_last_valid.leftCols(d)) : Mat();
  const Mat lb = has_last ? Mat(grad_last_valid.rightCols(d)) : Mat();
  UnrollGrads f = bptt_backward(layer.forward, result.forward_cache, gf, lf);
  UnrollGrads b = bptt_backward(*layer.backward, *result.backward_cache, gb, lb);
  f.input.vector() += b.input.vector();
  return {std::move(f.params), std::move(b.params), std::move(f.input)};
}

std::vector<LayerResult> stack(std::span<const RecurrentLayer> layers, const SequenceBatch& batch) {
  if (layers.empty()) throw InputError("stack: no layers");
  for (std::size_t l = 1; l < layers.size(); ++l) {
    if (layers[l].input_size() != layers[l - 1].output_size()) {
      throw DimensionError("stack: layer " + std::to_string(l) + " expects " +
                           std::to_string(layers[l].input_size()) + " inputs but layer " + std::to_string(l - 1) +
                           " produces " + std::to_string(layers[l - 1].output_size()));
    }
  }
  std::vector<LayerResult> results;
  results.push_back(run_layer(layers[0], batch));
  for (std::size_t l = 1; l < layers.size(); ++l) {
    const SequenceBatch next{results.back().outputs, batch.lengths};
    results.push_back(run_layer(layers[l], next));
  }
  return results;
}

std::vector<LayerGrads> stack_backward(std::span<const RecurrentLayer> layers,
                                       const std::vector<LayerResult>& results, const MatRef& grad_last_valid) {
  std::vector<LayerGrads> grads(layers.size());
  const Tensor none;
  for (std::size_t l = layers.size(); l-- > 0;) {
    if (l + 1 == layers.size()) {
      grads[l] = layer_backward(layers[l], results[l], none, grad_last_valid);
    } else {
      grads[l] = layer_backward(layers[l], results[l], grads[l + 1].input, Mat());
    }
  }
  return grads;
}

}  // namespace twostream
