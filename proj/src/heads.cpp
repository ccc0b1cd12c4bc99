#include "twostream/heads.hpp"

#include <algorithm>
#include <cmath>

#include "twostream/init.hpp"

namespace twostream {

DenseParams DenseParams::zeros(Index in, Index out, DenseActivation act) {
  return {Tensor({out, in}), Tensor({out}), act};
}

DenseParams DenseParams::glorot(Index in, Index out, Rng& rng, DenseActivation act) {
  auto p = zeros(in, out, act);
  glorot_fill(p.W, in, out, rng);
  return p;
}

DenseOutput dense_forward(const DenseParams& p, const MatRef& x) {
  if (x.cols() != p.inputs()) {
    throw DimensionError("dense: input has " + std::to_string(x.cols()) + " features, layer expects " +
                         std::to_string(p.inputs()));
  }
  Mat y = x * p.W.matrix().transpose();
  y.rowwise() += p.b.vector().transpose();
  if (p.activation == DenseActivation::Relu) y = y.cwiseMax(Real(0));
  DenseOutput out{y, {Mat(x), Mat()}};
  if (p.activation == DenseActivation::Relu) out.cache.y = std::move(y);
  return out;
}

DenseGrads dense_backward(const DenseParams& p, const DenseCache& cache, const MatRef& dy) {
  if (dy.rows() != cache.x.rows() || dy.cols() != p.outputs()) throw DimensionError("dense_backward: shape mismatch");
  Mat da = dy;
  if (p.activation == DenseActivation::Relu) da = (cache.y.array() > 0).select(dy, Real(0));
  DenseGrads g{Tensor(p.W.shape()), Tensor(p.b.shape()), da * p.W.matrix()};
  g.W.matrix().noalias() = da.transpose() * cache.x;
  g.b.vector() = da.colwise().sum().transpose();
  return g;
}

LossOutput softmax_xent(const MatRef& logits, std::span<const int> labels) {
  const Index n = logits.rows(), K = logits.cols();
  if (Index(labels.size()) != n) throw DimensionError("softmax_xent: label count does not match rows");
  Mat probs = softmax_rows(logits);
  double loss = 0;
  for (Index r = 0; r < n; ++r) {
    const int y = labels[std::size_t(r)];
    if (y < 0 || y >= K) throw InputError("softmax_xent: label " + std::to_string(y) + " outside [0, " + std::to_string(K) + ")");
    // log-sum-exp form keeps tiny probabilities exact
    const auto row = logits.row(r);
    const Real mx = row.maxCoeff();
    const double lse = double(mx) + std::log(double((row.array() - mx).exp().sum()));
    loss += lse - double(row(y));
    probs(r, y) -= 1;
  }
  probs /= Real(n);
  return {loss / double(n), std::move(probs)};
}

int argmax_row(const Eigen::Ref<const RowVec<Real>>& row) {
  int best = 0;
  for (Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = int(k);
  }
  return best;
}

// ---------------------------------------------------------------------------
// SVM

namespace {

std::vector<Real> binary_targets(std::span<const int> labels, int k) {
  std::vector<Real> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] == k ? Real(1) : Real(-1);
  return y;
}

// Exact minimizer over b of sum_i max(0, 1 - y_i (s_i + b)). The objective is
// piecewise linear with slope -P + (#breakpoints <= b), so the optimum is the
// interval between the P-th and (P+1)-th sorted breakpoints; take its midpoint.
Real optimal_bias(const Vec& scores, std::span<const Real> y) {
  std::vector<Real> breaks(std::size_t(scores.size()));
  std::size_t positives = 0;
  for (Index i = 0; i < scores.size(); ++i) {
    breaks[std::size_t(i)] = y[std::size_t(i)] - scores(i);
    if (y[std::size_t(i)] > 0) ++positives;
  }
  std::sort(breaks.begin(), breaks.end());
  if (positives == 0) return breaks.front() - 1;
  if (positives == breaks.size()) return breaks.back() + 1;
  return Real(0.5) * (breaks[positives - 1] + breaks[positives]);
}

}  // namespace

double svm_binary_objective(const Eigen::Ref<const Vec>& w, Real b, const MatRef& x, std::span<const Real> y,
                            double C) {
  const Vec scores = x * w;
  double hinge = 0;
  for (Index i = 0; i < x.rows(); ++i) hinge += std::max(0.0, 1.0 - double(y[std::size_t(i)] * (scores(i) + b)));
  return 0.5 * double(w.squaredNorm()) + C * hinge;
}

double svm_objective(const SvmModel& m, const MatRef& x, std::span<const int> labels) {
  double total = 0;
  for (Index k = 0; k < m.classes(); ++k) {
    const auto y = binary_targets(labels, int(k));
    total += svm_binary_objective(m.W.matrix().row(k).transpose(), m.b[k], x, y, m.C);
  }
  return total;
}

std::pair<Mat, Vec> svm_objective_gradient(const SvmModel& m, const MatRef& x, std::span<const int> labels) {
  Mat gW = m.W.matrix();
  Vec gb = Vec::Zero(m.classes());
  const Mat scores = (x * m.W.matrix().transpose()).rowwise() + m.b.vector().transpose();
  for (Index k = 0; k < m.classes(); ++k) {
    for (Index i = 0; i < x.rows(); ++i) {
      const Real y = labels[std::size_t(i)] == k ? Real(1) : Real(-1);
      if (y * scores(i, k) < 1) {
        gW.row(k) -= Real(m.C) * y * x.row(i);
        gb(k) -= Real(m.C) * y;
      }
    }
  }
  return {std::move(gW), std::move(gb)};
}

SvmTrainResult svm_train(const MatRef& features, std::span<const int> labels, int classes, double C,
                         const SvmTrainOptions& options) {
  const Index n = features.rows(), d = features.cols();
  if (Index(labels.size()) != n) throw DimensionError("svm_train: label count does not match rows");
  if (classes < 2) throw InputError("svm_train: need at least 2 classes");
  if (!(C > 0)) throw InputError("svm_train: C must be positive");
  if (n < classes) throw InputError("svm_train: fewer samples than classes");
  std::vector<int> counts(std::size_t(classes), 0);
  for (int y : labels) {
    if (y < 0 || y >= classes) throw InputError("svm_train: label out of range");
    ++counts[std::size_t(y)];
  }
  if (std::count_if(counts.begin(), counts.end(), [](int c) { return c > 0; }) < 2) {
    throw InputError("svm_train: data contains a single class");
  }

  SvmTrainResult result{{Tensor({classes, d}), Tensor({classes}), C}, {}, {}};
  result.objective.assign(std::size_t(options.epochs), 0.0);
  result.best_objective.assign(std::size_t(options.epochs), 0.0);
  const double lambda = 1.0 / (C * double(n));

  for (int k = 0; k < classes; ++k) {
    const auto y = binary_targets(labels, k);
    Vec w = Vec::Zero(d);
    Real b = optimal_bias(features * w, y);
    Vec best_w = w;
    Real best_b = b;
    double best = svm_binary_objective(w, b, features, y, C);
    for (int t = 1; t <= options.epochs; ++t) {
      // Subgradient of lambda/2 |w|^2 + (1/n) sum hinge, i.e. the primal scaled by 1/(C n).
      const Vec scores = features * w;
      Vec gw = Vec::Zero(d);
      for (Index i = 0; i < n; ++i) {
        if (y[std::size_t(i)] * (scores(i) + b) < 1) gw -= y[std::size_t(i)] * features.row(i).transpose();
      }
      const Real eta = Real(1.0 / (lambda * t));
      w = (1 - eta * Real(lambda)) * w - eta * (gw / Real(n));
      b = optimal_bias(features * w, y);
      const double obj = svm_binary_objective(w, b, features, y, C);
      if (obj < best) {
        best = obj;
        best_w = w;
        best_b = b;
      }
      result.objective[std::size_t(t - 1)] += obj;
      result.best_objective[std::size_t(t - 1)] += best;
    }
    result.model.W.matrix().row(k) = best_w.transpose();
    result.model.b[k] = best_b;
  }
  return result;
}

SvmPrediction svm_predict(const SvmModel& m, const MatRef& features) {
  if (features.cols() != m.features()) {
    throw DimensionError("svm_predict: features have " + std::to_string(features.cols()) + " columns, model expects " +
                         std::to_string(m.features()));
  }
  SvmPrediction p;
  p.margins = features * m.W.matrix().transpose();
  p.margins.rowwise() += m.b.vector().transpose();
  p.labels.resize(std::size_t(features.rows()));
  for (Index i = 0; i < features.rows(); ++i) p.labels[std::size_t(i)] = argmax_row(p.margins.row(i));
  return p;
}

}  // namespace twostream
