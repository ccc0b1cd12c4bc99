#include <doctest.h>

#include <cmath>

#include "twostream/fusion.hpp"
#include "twostream/heads.hpp"

using namespace twostream;

namespace {

Prediction pred(std::initializer_list<double> p) {
  Vec v(Index(p.size()));
  Index k = 0;
  for (double x : p) v[k++] = Real(x);
  return Prediction::from_probs(v);
}

// Two Gaussian blobs per class around well separated centers.
std::pair<Mat, std::vector<int>> blobs(int classes, int per_class, double spread, Rng& rng) {
  Mat x(classes * per_class, 2);
  std::vector<int> y;
  for (int k = 0; k < classes; ++k) {
    const double angle = 2 * M_PI * k / classes;
    for (int i = 0; i < per_class; ++i) {
      x(k * per_class + i, 0) = Real(3 * std::cos(angle) + spread * rng.normal());
      x(k * per_class + i, 1) = Real(3 * std::sin(angle) + spread * rng.normal());
      y.push_back(k);
    }
  }
  return {x, y};
}

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  int hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return double(hit) / double(a.size());
}

}  // namespace

TEST_CASE("dense forward against a hand computation") {
  auto p = DenseParams::zeros(2, 2, DenseActivation::Relu);
  p.W = Tensor({2, 2}, {1, -1, 2, 0.5});
  p.b = Tensor({2}, {0.5, -5});
  Mat x(1, 2);
  x << 2, 1;
  const auto y = dense_forward(p, x).y;
  CHECK(y(0, 0) == doctest::Approx(1.5));
  CHECK(y(0, 1) == 0.0);  // 4 + 0.5 - 5 clipped by the ReLU
}

TEST_CASE("softmax cross-entropy") {
  Mat logits(2, 3);
  logits << 1, 2, 3, 0, 0, 0;
  const std::vector<int> labels{2, 0};
  const auto out = softmax_xent(logits, labels);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  const double expected = 0.5 * (-std::log(std::exp(3.0) / z) - std::log(1.0 / 3));
  CHECK(std::abs(out.loss - expected) < 1e-14);
  CHECK(std::abs(out.grad_logits(0, 2) - 0.5 * (std::exp(3.0) / z - 1)) < 1e-14);
  CHECK(std::abs(out.grad_logits(1, 1) - 0.5 / 3) < 1e-14);
  CHECK(std::abs(out.grad_logits.sum()) < 1e-14);
  const std::vector<int> bad{3, 0};
  CHECK_THROWS_AS(softmax_xent(logits, bad), InputError);
}

TEST_CASE("svm separates separable clouds") {
  Rng rng(3);
  auto [x, y] = blobs(3, 30, 0.3, rng);
  const auto trained = svm_train(x, y, 3, 8.0);
  CHECK(accuracy(svm_predict(trained.model, x).labels, y) == 1.0);
  for (const auto& curve : {trained.best_objective}) {
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
  }
}

TEST_CASE("svm weight norm grows with C") {
  Rng rng(4);
  auto [x, y] = blobs(2, 20, 1.0, rng);
  const auto small = svm_train(x, y, 2, 1e-6).model;
  const auto large = svm_train(x, y, 2, 8.0).model;
  CHECK(small.W.vector().norm() < large.W.vector().norm());
  CHECK(small.W.vector().norm() < 1e-3 * large.W.vector().norm());
}

TEST_CASE("svm duplicated data with half C gives the same model") {
  Rng rng(5);
  auto [x, y] = blobs(3, 10, 0.8, rng);
  Mat xx(2 * x.rows(), x.cols());
  xx << x, x;
  std::vector<int> yy = y;
  yy.insert(yy.end(), y.begin(), y.end());
  const auto a = svm_train(x, y, 3, 2.0).model;
  const auto b = svm_train(xx, yy, 3, 1.0).model;
  CHECK((a.W.vector() - b.W.vector()).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((svm_predict(a, x).margins - svm_predict(b, x).margins).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("svm rejects single-class data") {
  Mat x = Mat::Random(4, 2);
  const std::vector<int> y{1, 1, 1, 1};
  CHECK_THROWS(svm_train(x, y, 2, 1.0));
}

TEST_CASE("decision fusion truth table") {
  const TrustWeights equal{1.0, 1.0};
  const TrustWeights weighted{1.0, 2.88};
  const auto r = pred({0.9, 0.05, 0.05});
  const auto c = pred({0.2, 0.6, 0.2});
  CHECK(&decision_fuse(equal, r, c) == &r);

  const auto c_low = pred({0.3, 0.4, 0.3});
  CHECK(&decision_fuse(weighted, r, c_low) == &c_low);  // 0.9 < 2.88 * 0.4

  const auto r_tie = pred({0.25, 0.5, 0.25});
  const auto c_tie = pred({0.5, 0.25, 0.25});
  CHECK(&decision_fuse(equal, r_tie, c_tie) == &c_tie);

  const auto c2 = pred({0.5, 0.5});
  CHECK_THROWS(decision_fuse(equal, r, c2));
}

TEST_CASE("trust weight grid") {
  const auto grid = trust_weight_grid();
  CHECK(grid.size() == 101);
  CHECK(std::find(grid.begin(), grid.end(), 1.0) != grid.end());
  CHECK(*std::min_element(grid.begin(), grid.end()) == doctest::Approx(0.1));
  CHECK(*std::max_element(grid.begin(), grid.end()) == doctest::Approx(10.0));
}

TEST_CASE("trust weight search") {
  std::vector<Prediction> rnn, cnn;
  std::vector<int> labels;
  for (int i = 0; i < 20; ++i) {
    const int truth = i % 2;
    const double rc = 0.6 + 0.02 * i, cc = 0.55 + 0.01 * i;
    rnn.push_back(truth == 0 ? pred({1 - rc, rc}) : pred({rc, 1 - rc}));  // always wrong
    cnn.push_back(truth == 0 ? pred({cc, 1 - cc}) : pred({1 - cc, cc}));  // always right
    labels.push_back(truth);
  }
  SUBCASE("trusting the right stream wins") {
    const auto best = search_trust_weights(rnn, cnn, labels);
    CHECK(best.accuracy == 1.0);
    CHECK(best.weights.rnn == 1.0);
    CHECK(fused_accuracy(best.weights, rnn, cnn, labels) == 1.0);
  }
  SUBCASE("identical streams tie at the smallest weight") {
    const auto best = search_trust_weights(cnn, cnn, labels);
    CHECK(best.weights.cnn == doctest::Approx(0.1));
  }
  SUBCASE("empty validation set") {
    CHECK_THROWS(search_trust_weights({}, {}, {}));
  }
}

TEST_CASE("feature fusion") {
  Rng rng(8);
  const Mat a = Mat::Random(5, 24), b = Mat::Random(5, 64);
  const Mat f = feature_fuse(a, b);
  CHECK(f.cols() == 88);
  CHECK((f.rowwise().norm().array() - 1).abs().maxCoeff() < 1e-14);
  const Mat z = feature_fuse(a, Mat::Zero(5, 64));
  const Mat an = a.rowwise().normalized();
  CHECK((z.leftCols(24) - an).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(z.rightCols(64).isZero());
  CHECK_THROWS(feature_fuse(a, Mat::Zero(4, 64)));
}
