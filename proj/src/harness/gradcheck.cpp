#include "twostream/harness/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "twostream/c3d.hpp"
#include "twostream/conv3d.hpp"
#include "twostream/heads.hpp"
#include "twostream/harness/skeleton_model.hpp"
#include "twostream/normreg.hpp"
#include "twostream/recurrent.hpp"

namespace twostream {
namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (Index k = 0; k < t.size(); ++k) t[k] = Real(rng.normal(0.0, scale));
  return t;
}

Mat random_mat(Index rows, Index cols, Rng& rng) {
  Mat m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = Real(rng.normal());
  return m;
}

double project(const Tensor& r, const Tensor& y) { return double(r.vector().dot(y.vector())); }
double project(const Mat& r, const MatRef& y) { return double(r.cwiseProduct(y).sum()); }

std::vector<Index> random_lengths(Index n, Index steps, Rng& rng) {
  std::vector<Index> lengths;
  for (Index i = 0; i < n; ++i) lengths.push_back(1 + Index(rng.below(std::uint64_t(steps))));
  lengths[0] = steps;
  return lengths;
}

SequenceBatch random_batch(Index n, Index steps, Index features, Rng& rng) {
  SequenceBatch batch{random_tensor({n, steps, features}, rng), random_lengths(n, steps, rng)};
  for (Index i = 0; i < n; ++i) {
    for (Index t = batch.lengths[std::size_t(i)]; t < steps; ++t) {
      for (Index f = 0; f < features; ++f) batch.data(i, t, f) = 0;
    }
  }
  return batch;
}

std::string dims(std::initializer_list<Index> d) {
  std::string s;
  for (Index v : d) s += (s.empty() ? "" : "x") + std::to_string(v);
  return s;
}

void add_cell_variables(std::vector<GradVariable>& vars, const std::string& prefix, CellParams& cell,
                        const CellParams& grads) {
  auto v = cell_tensors(cell);
  auto g = cell_tensors(grads);
  for (std::size_t k = 0; k < v.size(); ++k) vars.push_back({prefix + v[k].first, v[k].second, *g[k].second});
}

const char* cell_name(CellKind kind) {
  switch (kind) {
    case CellKind::Rnn: return "rnn";
    case CellKind::Lstm: return "lstm";
    case CellKind::Gru: return "gru";
  }
  return "?";
}

GradcheckEntry check_unroll(CellKind kind, Direction dir, Rng& rng, const GradcheckOptions& opt) {
  const Index n = 3, T = 5, in = 3, d = 4;
  CellParams cell = make_cell(kind, in, d, rng);
  SequenceBatch batch = random_batch(n, T, in, rng);
  const Tensor r_out = random_tensor({n, T, d}, rng);
  const Mat r_last = random_mat(n, d, rng);
  auto loss = [&] {
    auto res = unroll(cell, batch, dir);
    return project(r_out, res.outputs) + project(r_last, res.last_valid);
  };
  auto res = unroll(cell, batch, dir);
  auto grads = bptt_backward(cell, res.cache, r_out, r_last);
  std::vector<GradVariable> vars;
  add_cell_variables(vars, "", cell, grads.params);
  vars.push_back({"x", &batch.data, grads.input});
  std::string layer = cell_name(kind);
  if (dir == Direction::Backward) layer += " (reverse)";
  return check_gradient(layer, "n,T,i,d=" + dims({n, T, in, d}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_bidirectional(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 3, T = 4, in = 2, d = 3;
  RecurrentLayer layer{make_cell(CellKind::Gru, in, d, rng), make_cell(CellKind::Gru, in, d, rng)};
  SequenceBatch batch = random_batch(n, T, in, rng);
  const Tensor r_out = random_tensor({n, T, 2 * d}, rng);
  const Mat r_last = random_mat(n, 2 * d, rng);
  auto loss = [&] {
    auto res = run_layer(layer, batch);
    return project(r_out, res.outputs) + project(r_last, res.last_valid);
  };
  auto res = run_layer(layer, batch);
  auto grads = layer_backward(layer, res, r_out, r_last);
  std::vector<GradVariable> vars;
  add_cell_variables(vars, "fwd.", layer.forward, grads.forward);
  add_cell_variables(vars, "bwd.", *layer.backward, *grads.backward);
  vars.push_back({"x", &batch.data, grads.input});
  return check_gradient("bidirectional gru", "n,T,i,d=" + dims({n, T, in, d}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_stack(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 3, T = 4, in = 2, d = 3;
  std::vector<RecurrentLayer> layers;
  layers.push_back({make_cell(CellKind::Lstm, in, d, rng), make_cell(CellKind::Lstm, in, d, rng)});
  layers.push_back({make_cell(CellKind::Lstm, 2 * d, d, rng), std::nullopt});
  SequenceBatch batch = random_batch(n, T, in, rng);
  const Mat r_last = random_mat(n, d, rng);
  auto loss = [&] { return project(r_last, stack(layers, batch).back().last_valid); };
  const auto results = stack(layers, batch);
  auto grads = stack_backward(layers, results, r_last);
  std::vector<GradVariable> vars;
  add_cell_variables(vars, "l0.fwd.", layers[0].forward, grads[0].forward);
  add_cell_variables(vars, "l0.bwd.", *layers[0].backward, *grads[0].backward);
  add_cell_variables(vars, "l1.", layers[1].forward, grads[1].forward);
  vars.push_back({"x", &batch.data, grads[0].input});
  return check_gradient("stacked lstm (bi + uni)", "n,T,i,d=" + dims({n, T, in, d}), std::move(vars), loss, rng,
                        opt);
}

GradcheckEntry check_batchnorm(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 6, d = 4;
  auto p = BatchNormParams::make(d);
  p.gamma = random_tensor({d}, rng);
  p.beta = random_tensor({d}, rng);
  Tensor x = random_tensor({n, d}, rng);
  const Mat r = random_mat(n, d, rng);
  auto loss = [&] { return project(r, batchnorm_forward(p, x.matrix(), Mode::Train).y); };
  auto out = batchnorm_forward(p, x.matrix(), Mode::Train);
  auto g = batchnorm_backward(out.cache, r);
  std::vector<GradVariable> vars{{"gamma", &p.gamma, Tensor({d}, g.dgamma)},
                                 {"beta", &p.beta, Tensor({d}, g.dbeta)},
                                 {"x", &x, Tensor::from_matrix(g.dx)}};
  return check_gradient("batchnorm (train)", "n,d=" + dims({n, d}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_dropout(Mode mode, Rng& rng, const GradcheckOptions& opt) {
  const Index n = 5, d = 4;
  Tensor x = random_tensor({n, d}, rng);
  const Mat r = random_mat(n, d, rng);
  const auto fixed = dropout(x.matrix(), {0.75, mode}, rng);
  // Train mode is checked with its mask held fixed.
  auto forward = [&] {
    if (mode == Mode::Inference) {
      Rng unused(0);
      return dropout(x.matrix(), {0.75, mode}, unused).y;
    }
    return Mat(x.matrix().cwiseProduct(fixed.mask));
  };
  auto loss = [&] { return project(r, forward()); };
  const Mat dx = mode == Mode::Inference ? r : dropout_backward(fixed.mask, r);
  std::vector<GradVariable> vars{{"x", &x, Tensor::from_matrix(dx)}};
  return check_gradient(mode == Mode::Inference ? "dropout (off)" : "dropout (fixed mask)", "n,d=" + dims({n, d}),
                        std::move(vars), loss, rng, opt);
}

GradcheckEntry check_dense(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 4, in = 5, out = 3;
  auto p = DenseParams::glorot(in, out, rng, DenseActivation::Relu);
  p.b = random_tensor({out}, rng, 0.5);
  Tensor x = random_tensor({n, in}, rng);
  const Mat r = random_mat(n, out, rng);
  auto loss = [&] { return project(r, dense_forward(p, x.matrix()).y); };
  auto y = dense_forward(p, x.matrix());
  auto g = dense_backward(p, y.cache, r);
  std::vector<GradVariable> vars{{"W", &p.W, g.W}, {"b", &p.b, g.b}, {"x", &x, Tensor::from_matrix(g.dx)}};
  return check_gradient("dense (relu)", "n,in,out=" + dims({n, in, out}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_softmax_xent(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 4, k = 5;
  Tensor logits = random_tensor({n, k}, rng, 2.0);
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) labels.push_back(int(rng.below(std::uint64_t(k))));
  auto loss = [&] { return softmax_xent(logits.matrix(), labels).loss; };
  const auto g = softmax_xent(logits.matrix(), labels).grad_logits;
  std::vector<GradVariable> vars{{"logits", &logits, Tensor::from_matrix(g)}};
  return check_gradient("softmax-xent", "n,k=" + dims({n, k}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_conv3d(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 2, c = 2, f = 3, t = 4, h = 5, w = 3;
  auto p = Conv3dParams::glorot(f, c, {3, 3, 3}, {1, 1, 1}, rng);
  p.bias = random_tensor({f}, rng, 0.5);
  Tensor x = random_tensor({n, c, t, h, w}, rng);
  const auto y0 = conv3d_forward(p, x);
  const Tensor r = random_tensor(y0.y.shape(), rng);
  auto loss = [&] { return project(r, conv3d_forward(p, x).y); };
  auto g = conv3d_backward(p, y0.cache, r);
  std::vector<GradVariable> vars{{"kernels", &p.kernels, g.kernels}, {"bias", &p.bias, g.bias}, {"x", &x, g.input}};
  return check_gradient("conv3d", "n,c,f,t,h,w=" + dims({n, c, f, t, h, w}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_maxpool3d(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 2, c = 2, t = 5, h = 4, w = 3;
  const Pool3dSpec spec{{2, 2, 2}};
  Tensor x = random_tensor({n, c, t, h, w}, rng);
  const auto y0 = maxpool3d(spec, x);
  const Tensor r = random_tensor(y0.y.shape(), rng);
  auto loss = [&] { return project(r, maxpool3d(spec, x).y); };
  std::vector<GradVariable> vars{{"x", &x, maxpool3d_backward(y0.cache, r)}};
  return check_gradient("maxpool3d", "n,c,t,h,w=" + dims({n, c, t, h, w}) + " window 2x2x2", std::move(vars), loss,
                        rng, opt);
}

GradcheckEntry check_svm(Rng& rng, const GradcheckOptions& opt) {
  const Index n = 9, d = 3;
  const int k = 3;
  std::vector<int> labels;
  for (Index i = 0; i < n; ++i) labels.push_back(int(i % k));
  SvmModel m;
  m.C = 2.0;
  Tensor x;
  // Redraw until every margin is away from the hinge, where the objective is smooth.
  for (;;) {
    x = random_tensor({n, d}, rng);
    m.W = random_tensor({k, d}, rng, 0.5);
    m.b = random_tensor({k}, rng, 0.5);
    const Mat scores = (x.matrix() * m.W.matrix().transpose()).rowwise() + m.b.vector().transpose();
    bool smooth = true;
    for (Index i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c) {
        const double y = labels[std::size_t(i)] == c ? 1.0 : -1.0;
        smooth = smooth && std::abs(1.0 - y * double(scores(i, c))) > 1e-3;
      }
    }
    if (smooth) break;
  }
  auto loss = [&] { return svm_objective(m, x.matrix(), labels); };
  const auto [dW, db] = svm_objective_gradient(m, x.matrix(), labels);
  std::vector<GradVariable> vars{{"W", &m.W, Tensor::from_matrix(dW)}, {"b", &m.b, Tensor({Index(k)}, db)}};
  return check_gradient("svm objective", "n,d,k=" + dims({n, d, k}), std::move(vars), loss, rng, opt);
}

GradcheckEntry check_skeleton_model(Rng& rng, const GradcheckOptions& opt) {
  SkeletonModelSpec spec{"BI-GRU2-BN-DP-H", 3, 3, 3, 0.75, 0.99};
  SkeletonModel model(spec, rng);
  SequenceBatch batch = random_batch(4, 5, 3, rng);
  const std::vector<int> labels{0, 1, 2, 1};
  const std::uint64_t mask_seed = rng.next_u64();
  auto loss = [&] {
    Rng masks(mask_seed);
    return softmax_xent(model.forward(batch, Mode::Train, masks).logits, labels).loss;
  };
  Rng masks(mask_seed);
  auto out = model.forward(batch, Mode::Train, masks);
  model.backward(out.cache, softmax_xent(out.logits, labels).grad_logits);
  std::vector<GradVariable> vars;
  for (const auto& p : model.params()) vars.push_back({p.name, p.value, *p.grad});
  return check_gradient("ladder model BI-GRU2-BN-DP-H", "n,T,i,d=4x5x3x3", std::move(vars), loss, rng, opt);
}

GradcheckEntry check_c3d_model(Rng& rng, const GradcheckOptions& opt) {
  const C3dSpec spec = C3dSpec::desk(3, 1, 4, 4, 4);
  C3dModel model(spec, rng);
  Tensor clips = random_tensor({2, 1, 4, 4, 4}, rng);
  const std::vector<int> labels{0, 2};
  auto loss = [&] { return softmax_xent(model.forward(clips).logits, labels).loss; };
  auto out = model.forward(clips);
  model.backward(out.cache, softmax_xent(out.logits, labels).grad_logits);
  std::vector<GradVariable> vars;
  for (const auto& p : model.params()) vars.push_back({p.name, p.value, *p.grad});
  return check_gradient("c3d desk model", "n,c,t,h,w=2x1x4x4x4", std::move(vars), loss, rng, opt);
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

std::string GradcheckReport::text() const {
  std::ostringstream os;
  os.precision(3);
  for (const auto& e : entries) {
    os << (e.passed ? "PASS " : "FAIL ") << e.layer << "  [" << e.shape << "]  max rel err " << std::scientific
       << e.max_rel_error << std::defaultfloat << "  worst " << e.worst << '\n';
  }
  os << (passed() ? "all " : "FAILED: not all ") << entries.size() << " layer checks within " << tolerance << '\n';
  return os.str();
}

GradcheckEntry check_gradient(const std::string& layer, const std::string& shape,
                              std::vector<GradVariable> variables, const std::function<double()>& loss,
                              Rng& rng, const GradcheckOptions& options) {
  GradcheckEntry entry{layer, shape, 0.0, "-", true};
  for (auto& var : variables) {
    if (var.analytic.shape() != var.value->shape()) {
      throw DimensionError("gradcheck " + layer + ": gradient for " + var.name + " has shape " +
                           shape_string(var.analytic.shape()) + ", value has " + shape_string(var.value->shape()));
    }
    std::vector<Index> coords;
    if (var.value->size() <= options.max_coords) {
      for (Index k = 0; k < var.value->size(); ++k) coords.push_back(k);
    } else {
      for (Index k = 0; k < options.max_coords; ++k) coords.push_back(Index(rng.below(std::uint64_t(var.value->size()))));
    }
    for (Index k : coords) {
      Real& v = (*var.value)[k];
      const Real saved = v;
      v = saved + Real(options.step);
      const double plus = loss();
      v = saved - Real(options.step);
      const double minus = loss();
      v = saved;
      const double numeric = (plus - minus) / (2 * options.step);
      const double analytic = double(var.analytic[k]);
      const double denom = std::max({std::abs(numeric), std::abs(analytic), options.floor});
      const double rel = std::abs(numeric - analytic) / denom;
      if (rel > entry.max_rel_error || entry.worst == "-") {
        entry.max_rel_error = rel;
        entry.worst = var.name + "[" + std::to_string(k) + "]";
      }
    }
  }
  entry.passed = entry.max_rel_error <= options.tolerance;
  return entry;
}

GradcheckReport gradcheck_all(Rng& rng, const GradcheckOptions& options) {
  GradcheckReport report;
  report.tolerance = options.tolerance;
  auto& e = report.entries;
  e.push_back(check_unroll(CellKind::Rnn, Direction::Forward, rng, options));
  e.push_back(check_unroll(CellKind::Lstm, Direction::Forward, rng, options));
  e.push_back(check_unroll(CellKind::Gru, Direction::Forward, rng, options));
  e.push_back(check_unroll(CellKind::Gru, Direction::Backward, rng, options));
  e.push_back(check_bidirectional(rng, options));
  e.push_back(check_stack(rng, options));
  e.push_back(check_batchnorm(rng, options));
  e.push_back(check_dropout(Mode::Inference, rng, options));
  e.push_back(check_dropout(Mode::Train, rng, options));
  e.push_back(check_dense(rng, options));
  e.push_back(check_softmax_xent(rng, options));
  e.push_back(check_conv3d(rng, options));
  e.push_back(check_maxpool3d(rng, options));
  e.push_back(check_svm(rng, options));
  e.push_back(check_skeleton_model(rng, options));
  e.push_back(check_c3d_model(rng, options));
  return report;
}

}  // namespace twostream
