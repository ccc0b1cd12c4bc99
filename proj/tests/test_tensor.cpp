#include <doctest.h>

#include <cmath>
#include <sstream>

#include "twostream/checkpoint.hpp"
#include "twostream/rng.hpp"
#include "twostream/tensor_io.hpp"

using namespace twostream;

namespace {

Tensor random_tensor(Shape shape, Rng& rng) {
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = Real(rng.normal());
  return t;
}

}  // namespace

TEST_CASE("row-major layout") {
  Tensor t({2, 3, 4});
  for (Index i = 0; i < t.size(); ++i) t[i] = Real(i);
  CHECK(t(1, 2, 3) == 23);
  CHECK(t(0, 1, 0) == 4);
  CHECK(t.matrix().rows() == 2);
  CHECK(t.matrix()(1, 0) == 12);
  CHECK_THROWS_AS(Tensor({2, 2}, {1, 2, 3}), DimensionError);
}

TEST_CASE("matmul matches loops") {
  Rng rng(1);
  const Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 5}, rng);
  const Tensor c = matmul(a, b);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 5; ++j) {
      double s = 0;
      for (Index k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      CHECK(std::abs(c(i, j) - s) < 1e-12);
    }
  }
  CHECK_THROWS_AS(matmul(a, a), DimensionError);
}

TEST_CASE("elementwise, softmax, concat, normalize") {
  const Tensor x({1, 3}, {-1.0, 0.0, 2.0});
  CHECK(elementwise(UnaryOp::Relu, x) == Tensor({1, 3}, {0.0, 0.0, 2.0}));
  CHECK(elementwise(UnaryOp::Sigmoid, x)[1] == 0.5);
  CHECK(elementwise(BinaryOp::Multiply, x, x) == Tensor({1, 3}, {1.0, 0.0, 4.0}));
  CHECK_THROWS_AS(elementwise(BinaryOp::Add, x, Tensor({3, 1})), DimensionError);

  const Tensor big({1, 2}, {1000.0, 1000.0});
  const Tensor s = softmax(big);
  CHECK(s[0] == 0.5);
  CHECK(s[1] == 0.5);

  const Tensor cat = concat_last(x, Tensor({1, 2}, {5.0, 6.0}));
  CHECK(cat == Tensor({1, 5}, {-1.0, 0.0, 2.0, 5.0, 6.0}));

  const Tensor v({2, 2}, {3.0, 4.0, 0.0, 0.0});
  const Tensor n = l2_normalize(v);
  CHECK(n == Tensor({2, 2}, {0.6, 0.8, 0.0, 0.0}));
}

TEST_CASE("TSR1 round trip") {
  Rng rng(2);
  const Tensor t = random_tensor({2, 3, 4}, rng);
  std::stringstream ss;
  write_tsr(ss, t);
  CHECK(ss.str().rfind("TSR1 3 2 3 4 f64\n", 0) == 0);
  CHECK(read_tsr(ss) == t);

  std::stringstream bad("TSR2 1 3 f64\n");
  CHECK_THROWS_AS(read_tsr(bad), FormatError);
  std::stringstream truncated;
  write_tsr(truncated, t);
  std::string data = truncated.str();
  data.resize(data.size() - 8);
  std::stringstream cut(data);
  CHECK_THROWS_AS(read_tsr(cut), FormatError);
}

TEST_CASE("CKPT1 round trip") {
  Rng rng(3);
  Checkpoint ckpt;
  ckpt.meta["kind"] = "test";
  ckpt.meta["note"] = "two words";
  ckpt.add("a", random_tensor({3}, rng));
  ckpt.add("b.W", random_tensor({2, 2}, rng));
  const auto path = std::filesystem::temp_directory_path() / "twostream_ckpt_test.ckpt";
  save_checkpoint(path, ckpt);
  const auto back = load_checkpoint(path);
  CHECK(back.meta == ckpt.meta);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.at("a") == ckpt.at("a"));
  CHECK(back.at("b.W") == ckpt.at("b.W"));
  CHECK_THROWS_AS(back.at("missing"), FormatError);
  std::filesystem::remove(path);
}

TEST_CASE("rng streams are fixed") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(7);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  c.shuffle(std::span<int>(v));
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
  for (int i = 0; i < 1000; ++i) {
    const double u = c.uniform();
    CHECK((u >= 0 && u < 1));
  }
}
