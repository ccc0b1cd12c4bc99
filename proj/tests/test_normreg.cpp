#include <doctest.h>

#include <cmath>

#include "twostream/normreg.hpp"

using namespace twostream;

TEST_CASE("batchnorm train mode normalizes with biased statistics") {
  auto p = BatchNormParams::make(2, 1e-5, 0.9);
  Mat x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  const auto out = batchnorm_forward(p, x, Mode::Train);
  CHECK(std::abs(out.y.col(0).mean()) < 1e-14);
  const double var0 = 1.25;  // biased variance of 1..4
  CHECK(std::abs(out.y(0, 0) - (1 - 2.5) / std::sqrt(var0 + 1e-5)) < 1e-12);
  CHECK(std::abs(p.running_mean[0] - 0.1 * 2.5) < 1e-14);
  CHECK(std::abs(p.running_var[0] - (0.9 + 0.1 * var0)) < 1e-14);
  CHECK(std::abs(p.running_var[1] - (0.9 + 0.1 * 125.0)) < 1e-12);
}

TEST_CASE("batchnorm inference is a fixed affine map") {
  auto p = BatchNormParams::make(3);
  p.running_mean = Tensor({3}, {1.0, -1.0, 0.5});
  p.running_var = Tensor({3}, {4.0, 1.0, 0.25});
  p.gamma = Tensor({3}, {2.0, 1.0, 1.0});
  p.beta = Tensor({3}, {0.0, 1.0, -1.0});
  Mat a = Mat::Random(5, 3);
  Mat b(2, 3);
  b << a.row(3), Mat::Random(1, 3);
  const Mat ya = batchnorm_infer(p, a), yb = batchnorm_infer(p, b);
  CHECK(ya.row(3) == yb.row(0));
  CHECK(std::abs(ya(0, 0) - 2 * (a(0, 0) - 1) / std::sqrt(4 + p.epsilon)) < 1e-12);
  const auto before = p.running_mean;
  batchnorm_forward(p, a, Mode::Inference);
  CHECK(p.running_mean == before);
}

TEST_CASE("batchnorm errors") {
  auto p = BatchNormParams::make(2);
  CHECK_THROWS_AS(batchnorm_forward(p, Mat::Zero(1, 2), Mode::Train), InputError);
  CHECK_THROWS_AS(batchnorm_forward(p, Mat::Zero(3, 3), Mode::Train), DimensionError);
  const auto infer = batchnorm_forward(p, Mat::Zero(3, 2), Mode::Inference);
  CHECK_THROWS_AS(batchnorm_backward(infer.cache, Mat::Zero(3, 2)), ContractError);
}

TEST_CASE("inverted dropout") {
  Rng rng(1);
  const Mat x = Mat::Constant(200, 50, 2.0);
  const auto train = dropout(x, {0.75, Mode::Train}, rng);
  const double kept = (train.mask.array() > 0).cast<double>().mean();
  CHECK(kept == doctest::Approx(0.75).epsilon(0.02));
  CHECK(((train.mask.array() == 0) || (train.mask.array() == Real(1 / 0.75))).all());
  CHECK(train.y.mean() == doctest::Approx(2.0).epsilon(0.03));
  const auto infer = dropout(x, {0.75, Mode::Inference}, rng);
  CHECK(infer.y == x);
  CHECK(infer.mask.size() == 0);
  const Mat g = dropout_backward(train.mask, Mat::Ones(200, 50));
  CHECK(g == train.mask);
}
