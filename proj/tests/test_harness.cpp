#include <doctest.h>

#include <limits>
#include <set>

#include "twostream/harness/gradcheck.hpp"
#include "twostream/harness/pipeline.hpp"

using namespace twostream;

namespace {

RunConfig tiny_config() {
  RunConfig cfg;
  cfg.synth.samples_per_class = 6;
  cfg.synth.subjects = 4;
  cfg.hidden = 6;
  cfg.batch = 8;
  cfg.epochs = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config("# comment\nmodel = GRU1-BN-DP\n  epochs=7  # trailing\n\nskeleton_shared = 0-1,4-5\n");
  CHECK(cfg.model == "GRU1-BN-DP");
  CHECK(cfg.epochs == 7);
  CHECK(cfg.synth.skeleton_shared == std::vector<std::pair<int, int>>{{0, 1}, {4, 5}});
  CHECK(cfg.hidden == RunConfig{}.hidden);

  CHECK_THROWS_WITH_AS(parse_config("epochz = 3\n"), doctest::Contains("epochz"), InputError);
  CHECK_THROWS_AS(parse_config("epochs = three\n"), InputError);
  CHECK_THROWS_AS(parse_config("epochs\n"), InputError);
  CHECK_THROWS_AS(parse_config("keep_best = maybe\n"), InputError);

  const auto text = to_text(cfg);
  CHECK(to_text(parse_config(text)) == text);
  CHECK(config_keys().size() > 40);
}

TEST_CASE("ladder layouts") {
  const auto top = ladder_layout("BI-GRU2-BN-DP-H");
  CHECK(top.cell == CellKind::Gru);
  CHECK(top.layers == 2);
  CHECK(top.bidirectional);
  CHECK(top.batchnorm);
  CHECK(top.dropout);
  CHECK(top.hidden_fc);
  const auto base = ladder_layout("RNN1");
  CHECK(base.cell == CellKind::Rnn);
  CHECK(!base.batchnorm);
  CHECK(!base.dropout);
  CHECK_THROWS_AS(ladder_layout("TRANSFORMER1"), InputError);
}

TEST_CASE("full-width top model") {
  Rng rng(1);
  SkeletonModel model({"BI-GRU2-BN-DP-H", 150, 300, 60}, rng);
  CHECK(model.layers().back().output_size() == 600);
  CHECK(model.feature_width() == 600);
  Rng r2(1);
  SkeletonModel lstm({"BI-LSTM2-BN-DP-H", 150, 300, 60}, r2);
  CHECK(4 * model.recurrent_parameter_count() == 3 * lstm.recurrent_parameter_count());
}

TEST_CASE("GRU update-gate bias option") {
  for (double bias : {0.0, 1.0}) {
    Rng rng(2);
    SkeletonModelSpec spec{"BI-GRU2-BN-DP-H", 6, 4, 3};
    spec.gru_update_bias = bias;
    const SkeletonModel model(spec, rng);
    for (const auto& layer : model.layers()) {
      for (const auto* cell : {&layer.forward, &*layer.backward}) {
        const auto& b = std::get<GruCellParams>(*cell).b_gates.vector();
        CHECK(b.head(4).isConstant(Real(bias)));
        CHECK(b.tail(4).isZero());
      }
    }
  }
}

TEST_CASE("same seed builds the same model") {
  const auto cfg = tiny_config();
  const auto data = synthetic_dataset(cfg);
  Rng a(9), b(9);
  const auto s1 = make_stream(cfg, data, a)->checkpoint();
  const auto s2 = make_stream(cfg, data, b)->checkpoint();
  REQUIRE(s1.tensors.size() == s2.tensors.size());
  for (std::size_t i = 0; i < s1.tensors.size(); ++i) CHECK(s1.tensors[i].second == s2.tensors[i].second);
}

TEST_CASE("missing feature tap") {
  const auto cfg = tiny_config();
  const auto data = synthetic_dataset(cfg);
  Rng rng(1);
  auto stream = make_stream(cfg, data, rng);
  CHECK_THROWS_WITH_AS(extract_features(stream->checkpoint(), data), doctest::Contains("tap"), InputError);
}

TEST_CASE("confusion matrix") {
  const std::vector<int> truth{0, 0, 1, 2, 2, 2};
  const std::vector<int> perfect = truth;
  const auto c = confusion_matrix(truth, perfect, 3);
  CHECK(confusion_accuracy(c) == 1.0);
  CHECK(c[2][2] == 3);
  const std::vector<int> constant(6, 1);
  const auto k = confusion_matrix(truth, constant, 3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t col = 0; col < 3; ++col) {
      if (col != 1) CHECK(k[r][col] == 0);
    }
  }
  CHECK(confusion_accuracy(k) == doctest::Approx(1.0 / 6));
  CHECK_THROWS_AS(confusion_matrix(truth, std::vector<int>{0}, 3), DimensionError);
}

TEST_CASE("zero-epoch training scores chance") {
  auto cfg = tiny_config();
  cfg.epochs = 0;
  cfg.model = "LSTM1";
  const auto data = synthetic_dataset(cfg);
  const auto splits = splits_for(data, cfg);
  const auto trained = train_stream(data, splits, cfg);
  CHECK(trained.result.steps == 0);
  CHECK(trained.result.test_accuracy < 0.5);
  long total = 0;
  for (const auto& row : trained.result.confusion) {
    for (long v : row) total += v;
  }
  CHECK(total == long(splits.test.size()));
}

TEST_CASE("training is deterministic and reports curves") {
  auto cfg = tiny_config();
  cfg.model = "GRU1-BN-DP";
  cfg.eval_every = 3;
  const auto data = synthetic_dataset(cfg);
  const auto splits = splits_for(data, cfg);
  const auto a = train_stream(data, splits, cfg);
  const auto b = train_stream(data, splits, cfg);
  CHECK(to_json(a.result).dump() == to_json(b.result).dump());
  CHECK(a.result.epoch_loss.size() == 2);
  CHECK(a.result.val_accuracy.size() == 2);
  CHECK(!a.result.val_curve.empty());
  CHECK(a.timing.step_seconds.size() == std::size_t(a.result.steps));
  CHECK(confusion_accuracy(a.result.confusion) == a.result.test_accuracy);
}

TEST_CASE("divergence aborts with a diagnostic") {
  auto cfg = tiny_config();
  cfg.model = "RNN1";
  cfg.optimizer = "sgd-halving";
  cfg.learning_rate = std::numeric_limits<double>::infinity();
  const auto data = synthetic_dataset(cfg);
  CHECK_THROWS_AS(train_stream(data, splits_for(data, cfg), cfg), DivergenceError);
}

TEST_CASE("feature extraction rows") {
  auto cfg = tiny_config();
  cfg.model = "BI-GRU1-BN-DP";
  const auto data = synthetic_dataset(cfg);
  cfg.model = "GRU1-BN-DP-H";
  const auto trained = train_stream(data, splits_for(data, cfg), cfg);
  const Mat f = extract_features(trained.model, data);
  CHECK(f.rows() == Index(data.samples.size()));
  CHECK(f.cols() == cfg.hidden);
}

TEST_CASE("video stream clip-averaged features") {
  auto cfg = tiny_config();
  cfg.model = "C3D-DESK";
  cfg.epochs = 1;
  cfg.clip_len = 8;
  const auto data = synthetic_dataset(cfg);
  const auto trained = train_stream(data, splits_for(data, cfg), cfg);
  const Mat f = extract_features(trained.model, data);
  CHECK(f.rows() == Index(data.samples.size()));
  CHECK(f.cols() == 64);
  CHECK((trained.probs.rowwise().sum().array() - 1).abs().maxCoeff() < 1e-12);
}

TEST_CASE("gradcheck") {
  Rng rng(1);
  const auto report = gradcheck_all(rng);
  CHECK(report.passed());
  std::set<std::string> layers;
  for (const auto& e : report.entries) layers.insert(e.layer);
  CHECK(layers.size() >= 8);

  SUBCASE("a corrupted gradient is reported") {
    Tensor w({3});
    w.vector() << 0.5, -1.0, 2.0;
    Tensor wrong({3});
    wrong.vector() = 2 * w.vector();
    wrong[1] += 0.1;
    auto loss = [&] { return double(w.vector().squaredNorm()); };
    Rng r(2);
    const auto entry = check_gradient("square", "[3]", {{"w", &w, wrong}}, loss, r);
    CHECK(!entry.passed);
    CHECK(entry.worst == "w[1]");
  }
}
