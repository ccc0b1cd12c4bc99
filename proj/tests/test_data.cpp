#include <doctest.h>

#include <set>

#include "twostream/data.hpp"
#include "twostream/synth.hpp"
#include "twostream/tensor_io.hpp"

using namespace twostream;

namespace {

SynthConfig small_synth() {
  SynthConfig cfg;
  cfg.samples_per_class = 8;
  cfg.subjects = 4;
  return cfg;
}

std::set<int> subjects_of(const Dataset& d, const std::vector<int>& idx) {
  std::set<int> s;
  for (int i : idx) s.insert(d.samples[std::size_t(i)].skeleton.subject);
  return s;
}

}  // namespace

TEST_CASE("pad_sequences") {
  Tensor one({1, 2, 3});
  one.vector().setConstant(7);
  const Tensor* tracks[] = {&one};
  const auto batch = pad_sequences(std::span<const Tensor* const>(tracks), 4);
  CHECK(batch.data.shape() == Shape{1, 4, 6});
  CHECK(batch.lengths == std::vector<Index>{1});
  for (Index t = 1; t < 4; ++t) {
    for (Index k = 0; k < 6; ++k) CHECK(batch.data(0, t, k) == 0);
  }
  for (Index k = 0; k < 6; ++k) CHECK(batch.data(0, 0, k) == 7);
  const auto exact = pad_sequences(std::span<const Tensor* const>(tracks), 1);
  CHECK(exact.data.vector() == one.vector());
}

TEST_CASE("synthetic dataset shapes and determinism") {
  const auto cfg = small_synth();
  Rng a(1), b(1);
  const auto d1 = generate_synthetic(cfg, a);
  const auto d2 = generate_synthetic(cfg, b);
  REQUIRE(d1.samples.size() == std::size_t(cfg.classes * cfg.samples_per_class));
  for (std::size_t i = 0; i < d1.samples.size(); ++i) {
    const auto& s = d1.samples[i];
    CHECK(s.skeleton.coords == d2.samples[i].skeleton.coords);
    CHECK(s.video.pixels == d2.samples[i].video.pixels);
    CHECK(s.skeleton.length() >= cfg.t_min);
    CHECK(s.skeleton.length() <= cfg.t_max);
    CHECK(s.skeleton.width() == cfg.persons * cfg.joints * 3);
    CHECK(s.video.pixels.shape() == Shape{3, 16, 16, 16});
    CHECK(s.video.pixels.vector().minCoeff() >= 0);
    CHECK(s.video.pixels.vector().maxCoeff() <= 1);
    CHECK(s.video.label == s.skeleton.label);
    CHECK(s.video.subject == s.skeleton.subject);
  }
}

TEST_CASE("signature sharing") {
  const auto ids = signature_ids(6, {{0, 1}});
  CHECK(ids[0] == ids[1]);
  CHECK(std::set<int>(ids.begin(), ids.end()).size() == 5);
  CHECK_THROWS_AS(signature_ids(6, {{0, 9}}), InputError);
}

TEST_CASE("synthetic config errors") {
  auto cfg = small_synth();
  cfg.t_min = 50;
  Rng rng(1);
  CHECK_THROWS_AS(generate_synthetic(cfg, rng), InputError);
}

TEST_CASE("cross-subject splits") {
  Rng g(2);
  const auto data = generate_synthetic(small_synth(), g);
  Rng r1(5), r2(5);
  const auto s = make_splits(data, {SplitMode::CrossSubject, 0.1}, r1);
  const auto again = make_splits(data, {SplitMode::CrossSubject, 0.1}, r2);
  CHECK(s.train == again.train);
  CHECK(s.test == again.test);
  CHECK(s.train.size() + s.val.size() + s.test.size() == data.samples.size());
  std::set<int> all(s.train.begin(), s.train.end());
  all.insert(s.val.begin(), s.val.end());
  all.insert(s.test.begin(), s.test.end());
  CHECK(all.size() == data.samples.size());
  // 4 subjects: 2 on the training side, one of them carved out for validation.
  CHECK(subjects_of(data, s.train).size() == 1);
  CHECK(subjects_of(data, s.val).size() == 1);
  CHECK(subjects_of(data, s.test).size() == 2);
}

TEST_CASE("cross-view splits") {
  Rng g(3);
  const auto data = generate_synthetic(small_synth(), g);
  Rng r(1);
  const auto s = make_splits(data, {SplitMode::CrossView, 0.1}, r);
  std::set<int> test_views, train_views;
  for (int i : s.test) test_views.insert(data.samples[std::size_t(i)].skeleton.view);
  for (int i : s.train) train_views.insert(data.samples[std::size_t(i)].skeleton.view);
  CHECK(test_views.size() == 1);
  CHECK(train_views.size() == 2);
  CHECK(!train_views.count(*test_views.begin()));
  for (int sub : subjects_of(data, s.val)) CHECK(!subjects_of(data, s.train).count(sub));
}

TEST_CASE("unsatisfiable split") {
  auto cfg = small_synth();
  cfg.views = 1;
  Rng g(4), r(1);
  const auto data = generate_synthetic(cfg, g);
  CHECK_THROWS_AS(make_splits(data, {SplitMode::CrossView, 0.1}, r), InputError);
}

TEST_CASE("dataset directory round trip") {
  Rng g(5);
  auto cfg = small_synth();
  cfg.samples_per_class = 2;
  const auto data = generate_synthetic(cfg, g);
  const auto dir = std::filesystem::temp_directory_path() / "twostream_dataset_test";
  std::filesystem::remove_all(dir);
  write_dataset(dir, data);
  const auto back = read_dataset(dir);
  REQUIRE(back.samples.size() == data.samples.size());
  CHECK(back.num_classes == data.num_classes);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    CHECK(back.samples[i].id == data.samples[i].id);
    CHECK(back.samples[i].label() == data.samples[i].label());
    CHECK(back.samples[i].skeleton.coords == data.samples[i].skeleton.coords);
    CHECK(back.samples[i].video.pixels == data.samples[i].video.pixels);
  }
  std::filesystem::remove_all(dir);
}
