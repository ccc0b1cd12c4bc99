#include <doctest.h>

#include <cmath>
#include <limits>

#include "twostream/c3d.hpp"
#include "twostream/conv3d.hpp"
#include "oracles.hpp"

using namespace twostream;

namespace {

void randomize(Tensor& t, Rng& rng) {
  for (Index i = 0; i < t.size(); ++i) t[i] = Real(rng.uniform(-1, 1));
}

Index draw(Rng& rng, Index lo, Index hi) { return lo + Index(rng.below(std::uint64_t(hi - lo + 1))); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  return (a.vector() - b.vector()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("conv3d matches nested loops on random instances") {
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    Rng rng(seed);
    const Index n = draw(rng, 1, 2), c = draw(rng, 1, 3), f = draw(rng, 1, 3);
    const Extent3 k{draw(rng, 1, 3), draw(rng, 1, 3), draw(rng, 1, 3)};
    const Extent3 pad{draw(rng, 0, k.t - 1), draw(rng, 0, k.h - 1), draw(rng, 0, k.w - 1)};
    Tensor x({n, c, draw(rng, k.t, 5), draw(rng, k.h, 6), draw(rng, k.w, 6)});
    randomize(x, rng);
    auto p = Conv3dParams::zeros(f, c, k, pad);
    randomize(p.kernels, rng);
    randomize(p.bias, rng);
    CHECK(max_abs_diff(conv3d_forward(p, x).y, oracle::conv(p, x)) < 1e-10);
  }
}

TEST_CASE("maxpool3d matches nested loops on random instances") {
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    Rng rng(1000 + seed);
    const Extent3 win{draw(rng, 1, 3), draw(rng, 1, 3), draw(rng, 1, 3)};
    Tensor x({draw(rng, 1, 2), draw(rng, 1, 3), draw(rng, 1, 7), draw(rng, 1, 7), draw(rng, 1, 7)});
    randomize(x, rng);
    CHECK(max_abs_diff(maxpool3d(Pool3dSpec{win}, x).y, oracle::pool(win, x)) < 1e-10);
  }
}

TEST_CASE("maxpool3d backward routes to the argmax") {
  Tensor x({1, 1, 2, 2, 2});
  for (Index i = 0; i < 8; ++i) x[i] = Real(i == 5 ? 9 : i);
  const auto out = maxpool3d(Pool3dSpec{{2, 2, 2}}, x);
  const Tensor g = maxpool3d_backward(out.cache, Tensor({1, 1, 1, 1, 1}, {3.0}));
  for (Index i = 0; i < 8; ++i) CHECK(g[i] == (i == 5 ? 3.0 : 0.0));
}

TEST_CASE("conv3d rejects mismatched channels") {
  const auto p = Conv3dParams::zeros(2, 3, {3, 3, 3}, {1, 1, 1});
  CHECK_THROWS_AS(conv3d_forward(p, Tensor({1, 2, 4, 4, 4})), DimensionError);
}

TEST_CASE("full C3D parameter counts") {
  // Each conv layer: filters * in_channels * 27 + filters. The fifth pool
  // rounds 2x7x7 up to 1x4x4, so fc6 sees 512 * 16 inputs.
  auto conv = [](Index f, Index c) { return f * c * 27 + f; };
  auto dense = [](Index in, Index out) { return in * out + out; };
  const std::vector<std::pair<std::string, Index>> expected = {
      {"conv1a", conv(64, 3)},     {"conv2a", conv(128, 64)},  {"conv3a", conv(256, 128)},
      {"conv3b", conv(256, 256)},  {"conv4a", conv(512, 256)}, {"conv4b", conv(512, 512)},
      {"conv5a", conv(512, 512)},  {"conv5b", conv(512, 512)}, {"fc6", dense(512 * 1 * 4 * 4, 4096)},
      {"fc7", dense(4096, 4096)},  {"fc8", dense(4096, 60)}};
  // The same values written out, as a guard against a shared mistake in the formulas above.
  CHECK(expected[0].second == 5248);
  CHECK(expected[1].second == 221312);
  CHECK(expected[2].second == 884992);
  CHECK(expected[3].second == 1769728);
  CHECK(expected[4].second == 3539456);
  CHECK(expected[5].second == 7078400);
  CHECK(expected[8].second == 33558528);
  CHECK(expected[9].second == 16781312);
  CHECK(expected[10].second == 245820);

  const auto chain = C3dSpec::full(60).shape_chain();
  Index total = 0;
  for (const auto& [name, count] : expected) {
    const auto it = std::find_if(chain.begin(), chain.end(), [&](const auto& l) { return l.name == name; });
    REQUIRE(it != chain.end());
    CHECK(it->parameters == count);
    total += count;
  }
  CHECK(C3dSpec::full(60).parameter_count() == total);
}

TEST_CASE("full C3D shape chain") {
  const auto chain = C3dSpec::full(60).shape_chain();
  auto shape_of = [&](const std::string& name) {
    for (const auto& l : chain) {
      if (l.name == name) return l.shape;
    }
    FAIL("missing layer " << name);
    return Shape{};
  };
  CHECK(shape_of("conv1a") == Shape{64, 16, 112, 112});
  CHECK(shape_of("pool1") == Shape{64, 16, 56, 56});
  CHECK(shape_of("pool2") == Shape{128, 8, 28, 28});
  CHECK(shape_of("pool5") == Shape{512, 1, 4, 4});
  CHECK(shape_of("fc8") == Shape{60});
}

TEST_CASE("desk C3D shapes and zero-init output") {
  const auto spec = C3dSpec::desk(6, 3, 8, 16, 16);
  const auto chain = spec.shape_chain();
  CHECK(chain.front().shape == Shape{8, 8, 16, 16});
  CHECK(chain[1].shape == Shape{8, 8, 8, 8});     // pool 1x2x2
  CHECK(chain[3].shape == Shape{16, 4, 4, 4});    // pool 2x2x2
  CHECK(chain.back().shape == Shape{6});

  const auto model = C3dModel::zeros(spec);
  Rng rng(5);
  Tensor clips({2, 3, 8, 16, 16});
  randomize(clips, rng);
  const Mat probs = softmax_rows(model.forward(clips).logits);
  CHECK((probs.array() - 1.0 / 6).abs().maxCoeff() < 1e-15);
}

TEST_CASE("C3D spec errors name the layer") {
  auto spec = C3dSpec::desk(6, 3, 8, 16, 16);
  spec.groups.front().filters.front() = 0;
  CHECK_THROWS_WITH_AS(spec.shape_chain(), doctest::Contains("conv1a"), InputError);
}

TEST_CASE("C3D checkpoint round trip") {
  Rng rng(6);
  const auto spec = C3dSpec::desk(4, 3, 4, 8, 8);
  C3dModel model(spec, rng);
  Checkpoint ckpt;
  model.save(ckpt);
  const auto loaded = C3dModel::load(ckpt);
  Tensor clips({1, 3, 4, 8, 8});
  randomize(clips, rng);
  CHECK(model.forward(clips).logits == loaded.forward(clips).logits);
}

TEST_CASE("clip split") {
  Tensor video({1, 40, 2, 2});
  for (Index t = 0; t < 40; ++t) {
    for (Index k = 0; k < 4; ++k) video[t * 4 + k] = Real(t);
  }
  SUBCASE("remainder of at least half a clip is padded with the last frame") {
    const auto clips = clip_split(video, 16);
    REQUIRE(clips.size() == 3);
    CHECK(clips[2](0, 0, 0, 0) == 32);
    CHECK(clips[2](0, 7, 0, 0) == 39);
    CHECK(clips[2](0, 15, 1, 1) == 39);
  }
  SUBCASE("short remainder is dropped") {
    CHECK(clip_split(video, 32).size() == 1);  // 8 leftover frames < 16
  }
  SUBCASE("video shorter than a clip yields one padded clip") {
    const auto clips = clip_split(video, 64);
    REQUIRE(clips.size() == 1);
    CHECK(clips[0].dim(1) == 64);
    CHECK(clips[0](0, 63, 0, 0) == 39);
  }
  SUBCASE("empty video") {
    CHECK_THROWS_AS(clip_split(Tensor({1, 0, 2, 2}), 16), InputError);
  }
}

TEST_CASE("clip average") {
  Mat probs(3, 3);
  probs << 0.6, 0.3, 0.1, 0.2, 0.7, 0.1, 0.1, 0.5, 0.4;
  const auto p = clip_average(probs);
  CHECK(p.label == 1);
  CHECK(std::abs(p.confidence - 0.5) < 1e-15);
  Mat reordered(3, 3);
  reordered << probs.row(2), probs.row(0), probs.row(1);
  CHECK((clip_average_features(reordered) - clip_average_features(probs)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("crops") {
  Tensor video({1, 1, 4, 6});
  for (Index i = 0; i < video.size(); ++i) video[i] = Real(i);
  const auto c = center_crop(video, 2, 2);
  CHECK(c.shape() == Shape{1, 1, 2, 2});
  CHECK(c(0, 0, 0, 0) == video(0, 0, 1, 2));
  Rng rng(2);
  const auto r = random_crop(video, 4, 6, rng);
  CHECK(r == video);
  CHECK_THROWS_AS(center_crop(video, 5, 2), DimensionError);
}
