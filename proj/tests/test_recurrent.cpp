#include <doctest.h>

#include <cmath>

#include "twostream/data.hpp"
#include "twostream/recurrent.hpp"
#include "oracles.hpp"

using namespace twostream;

namespace {

Mat random_mat(Index r, Index c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = Real(rng.uniform(-scale, scale));
  return m;
}

void randomize(Tensor& t, Rng& rng, double scale = 0.5) {
  for (Index i = 0; i < t.size(); ++i) t[i] = Real(rng.uniform(-scale, scale));
}

Tensor random_track(Index t, Index joints, Rng& rng) {
  Tensor track({t, joints, 3});
  randomize(track, rng, 1.0);
  return track;
}

}  // namespace

TEST_CASE("rnn cell matches scalar loops") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Index n = 3, i = 4, d = 5;
    auto p = RnnCellParams::zeros(i, d);
    randomize(p.W, rng);
    randomize(p.b, rng);
    const Mat x = random_mat(n, i, rng), h = random_mat(n, d, rng);
    const auto out = rnn_cell_forward(p, x, h);
    CHECK((out.h - oracle::rnn_step(p, x, h)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("lstm cell matches scalar loops") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const Index n = 3, i = 4, d = 5;
    auto p = LstmCellParams::zeros(i, d);
    randomize(p.W, rng);
    randomize(p.b, rng);
    const Mat x = random_mat(n, i, rng), h = random_mat(n, d, rng), c = random_mat(n, d, rng);
    const auto out = lstm_cell_forward(p, x, h, c);
    const auto ref = oracle::lstm_step(p, x, h, c);
    CHECK((out.c - ref.c).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((out.h - ref.h).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gru cell matches scalar loops") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(200 + seed);
    const Index n = 3, i = 4, d = 5;
    auto p = GruCellParams::zeros(i, d);
    randomize(p.W_gates, rng);
    randomize(p.W_cand, rng);
    randomize(p.b_gates, rng);
    randomize(p.b_cand, rng);
    const Mat x = random_mat(n, i, rng), h = random_mat(n, d, rng);
    const auto out = gru_cell_forward(p, x, h);
    CHECK((out.h - oracle::gru_step(p, x, h)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gate identities") {
  Rng rng(7);
  const Index n = 4, i = 3, d = 6;
  const Mat x = random_mat(n, i, rng), h = random_mat(n, d, rng), c = random_mat(n, d, rng);

  SUBCASE("gru update gate saturated keeps the state") {
    auto p = GruCellParams::zeros(i, d);
    randomize(p.W_cand, rng);
    p.b_gates.vector().head(d).setConstant(50);
    const auto out = gru_cell_forward(p, x, h);
    CHECK((out.h - h).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("lstm forget open, input closed keeps the cell") {
    auto p = LstmCellParams::zeros(i, d);
    randomize(p.W, rng);
    p.W.matrix().topRows(2 * d).setZero();
    p.b.vector().segment(0, d).setConstant(-50);
    p.b.vector().segment(d, d).setConstant(50);
    const auto out = lstm_cell_forward(p, x, h, c);
    CHECK((out.c - c).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("parameter counts") {
  Rng rng(1);
  for (Index i : {1, 7, 150}) {
    for (Index d : {1, 32, 300}) {
      const CellParams lstm = LstmCellParams::glorot(i, d, rng);
      const CellParams gru = GruCellParams::glorot(i, d, rng);
      const CellParams rnn = RnnCellParams::glorot(i, d, rng);
      CHECK(parameter_count(lstm) == 4 * (d * (i + d) + d));
      CHECK(parameter_count(rnn) == d * (i + d) + d);
      CHECK(4 * parameter_count(gru) == 3 * parameter_count(lstm));
    }
  }
}

TEST_CASE("initialization") {
  Rng rng(3);
  const auto lstm = LstmCellParams::glorot(10, 8, rng);
  CHECK(lstm.b.vector().segment(8, 8).isConstant(1.0));
  CHECK(lstm.b.vector().head(8).isZero());
  CHECK(lstm.b.vector().tail(16).isZero());
  const double limit = std::sqrt(6.0 / double(10 + 8 + 8));  // per gate block
  CHECK(lstm.W.vector().cwiseAbs().maxCoeff() <= limit);
  const auto gru = GruCellParams::glorot(10, 8, rng);
  CHECK(gru.b_gates.vector().isZero());
  CHECK(gru.b_cand.vector().isZero());
}

TEST_CASE("padding does not change the final state") {
  Rng rng(11);
  for (CellKind kind : {CellKind::Rnn, CellKind::Lstm, CellKind::Gru}) {
    const auto cell = make_cell(kind, 6, 5, rng);
    for (int trial = 0; trial < 50; ++trial) {
      const Index t = 1 + Index(rng.below(12));
      const Tensor track = random_track(t, 2, rng);
      const Tensor* one[] = {&track};
      const auto tight = pad_sequences(std::span<const Tensor* const>(one), t);
      const auto loose = pad_sequences(std::span<const Tensor* const>(one), t + 1 + Index(rng.below(20)));
      for (Direction dir : {Direction::Forward, Direction::Backward}) {
        const auto a = unroll(cell, tight, dir);
        const auto b = unroll(cell, loose, dir);
        CHECK(a.last_valid == b.last_valid);
      }
    }
  }
}

TEST_CASE("padded outputs are zero and lengths are per sample") {
  Rng rng(12);
  const auto cell = make_cell(CellKind::Gru, 3, 4, rng);
  const Tensor a = random_track(2, 1, rng), b = random_track(5, 1, rng);
  const Tensor* tracks[] = {&a, &b};
  const auto batch = pad_sequences(std::span<const Tensor* const>(tracks), 6);
  const auto out = unroll(cell, batch, Direction::Forward);
  for (Index t = 2; t < 6; ++t) {
    for (Index k = 0; k < 4; ++k) CHECK(out.outputs(0, t, k) == 0);
  }
  for (Index k = 0; k < 4; ++k) CHECK(out.last_valid(0, k) == out.outputs(0, 1, k));
  for (Index k = 0; k < 4; ++k) CHECK(out.last_valid(1, k) == out.outputs(1, 4, k));
}

TEST_CASE("backward direction equals forward over the reversed sequence") {
  Rng rng(13);
  const auto cell = make_cell(CellKind::Lstm, 3, 4, rng);
  const Tensor a = random_track(3, 1, rng), b = random_track(7, 1, rng);
  const Tensor* tracks[] = {&a, &b};
  const auto batch = pad_sequences(std::span<const Tensor* const>(tracks), 7);
  SequenceBatch reversed{reverse_sequences(batch.data, batch.lengths), batch.lengths};
  const auto bwd = unroll(cell, batch, Direction::Backward);
  const auto fwd = unroll(cell, reversed, Direction::Forward);
  CHECK((bwd.last_valid - fwd.last_valid).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("bidirectional and stacked widths") {
  Rng rng(14);
  RecurrentLayer bi{make_cell(CellKind::Gru, 6, 4, rng), make_cell(CellKind::Gru, 6, 4, rng)};
  RecurrentLayer top{make_cell(CellKind::Gru, 8, 4, rng), make_cell(CellKind::Gru, 8, 4, rng)};
  const Tensor a = random_track(5, 2, rng);
  const Tensor* tracks[] = {&a};
  const auto batch = pad_sequences(std::span<const Tensor* const>(tracks), 5);
  const RecurrentLayer layers[] = {bi, top};
  const auto out = stack(layers, batch);
  REQUIRE(out.size() == 2);
  CHECK(out[0].outputs.shape() == Shape{1, 5, 8});
  CHECK(out[1].last_valid.cols() == 8);
}

TEST_CASE("shape errors") {
  Rng rng(15);
  const auto p = LstmCellParams::glorot(3, 4, rng);
  CHECK_THROWS_AS(lstm_cell_forward(p, Mat::Zero(2, 5), Mat::Zero(2, 4), Mat::Zero(2, 4)), DimensionError);
  const Tensor a = random_track(5, 1, rng);
  const Tensor* tracks[] = {&a};
  CHECK_THROWS_AS(pad_sequences(std::span<const Tensor* const>(tracks), 4), InputError);
}
