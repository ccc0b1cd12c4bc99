#include "twostream/harness/pipeline.hpp"

#include <charconv>
#include <cmath>

#include "twostream/tensor_io.hpp"

namespace twostream {
namespace {

std::vector<int> all_indices(const Dataset& data) {
  std::vector<int> out(data.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = int(i);
  return out;
}

Mat gather_rows(const MatRef& m, std::span<const int> indices) {
  Mat out(Index(indices.size()), m.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) out.row(Index(i)) = m.row(indices[i]);
  return out;
}

void require_rows(const MatRef& m, const Dataset& data, const std::string& what) {
  if (m.rows() != Index(data.samples.size())) {
    throw DimensionError(what + " has " + std::to_string(m.rows()) + " rows but the dataset has " +
                         std::to_string(data.samples.size()) + " samples");
  }
}

}  // namespace

Splits splits_for(const Dataset& data, const RunConfig& cfg) {
  Rng rng(cfg.split_seed);
  return make_splits(data, {cfg.split, cfg.val_fraction}, rng);
}

Dataset synthetic_dataset(const RunConfig& cfg) {
  Rng rng(cfg.data_seed);
  return generate_synthetic(cfg.synth, rng);
}

TrainedStream train_stream(const Dataset& data, const Splits& splits, const RunConfig& cfg) {
  Rng init(cfg.seed);
  auto stream = make_stream(cfg, data, init);
  TrainedStream out;
  out.result = train(*stream, data, splits, cfg, &out.timing);
  Index parameters = 0;
  for (const auto& p : stream->params()) parameters += p.value->size();
  out.result.metrics["parameters"] = double(parameters);
  out.model = stream->checkpoint();
  out.probs = stream->predict(data, all_indices(data));
  return out;
}

Mat extract_features(const Checkpoint& model, const Dataset& data) {
  auto stream = load_stream(model);
  return stream->features(data, all_indices(data));
}

RunResult fuse_decision(const Dataset& data, const Splits& splits, const MatRef& rnn_probs, const MatRef& cnn_probs) {
  require_rows(rnn_probs, data, "RNN predictions");
  require_rows(cnn_probs, data, "CNN predictions");
  const auto val_rnn = predictions_from(gather_rows(rnn_probs, splits.val));
  const auto val_cnn = predictions_from(gather_rows(cnn_probs, splits.val));
  const auto search = search_trust_weights(val_rnn, val_cnn, data.labels(splits.val));

  const auto test_rnn = predictions_from(gather_rows(rnn_probs, splits.test));
  const auto test_cnn = predictions_from(gather_rows(cnn_probs, splits.test));
  std::vector<int> predicted;
  for (std::size_t i = 0; i < test_rnn.size(); ++i) {
    predicted.push_back(decision_fuse(search.weights, test_rnn[i], test_cnn[i]).label);
  }
  auto r = evaluate_labels("decision-fusion", data, splits.test, predicted);
  r.metrics["trust_rnn"] = search.weights.rnn;
  r.metrics["trust_cnn"] = search.weights.cnn;
  r.metrics["val_accuracy"] = search.accuracy;
  return r;
}

FeatureFusionOutput fuse_features(const Dataset& data, const Splits& splits, const MatRef& rnn_features,
                                  const MatRef& cnn_features, const RunConfig& cfg) {
  require_rows(rnn_features, data, "RNN features");
  require_rows(cnn_features, data, "CNN features");
  FeatureFusionOutput out;
  out.fused = feature_fuse(rnn_features, cnn_features);
  const Mat train_x = gather_rows(out.fused, splits.train);
  const auto train_y = data.labels(splits.train);
  const Mat val_x = gather_rows(out.fused, splits.val);
  const auto val_y = data.labels(splits.val);
  const SvmTrainOptions options{cfg.svm_epochs};

  std::vector<double> grid{cfg.svm_c};
  if (cfg.svm_search) {
    grid.clear();
    for (int e = -3; e <= 5; ++e) grid.push_back(std::ldexp(1.0, e));
  }
  double best_val = -1;
  for (double c : grid) {
    auto trained = svm_train(train_x, train_y, data.num_classes, c, options);
    const auto pred = svm_predict(trained.model, val_x).labels;
    long correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == val_y[i];
    const double acc = val_y.empty() ? 0.0 : double(correct) / double(val_y.size());
    if (acc > best_val) {
      best_val = acc;
      out.svm = std::move(trained.model);
    }
  }
  const auto pred = svm_predict(out.svm, gather_rows(out.fused, splits.test)).labels;
  out.result = evaluate_labels("feature-fusion", data, splits.test, pred);
  out.result.metrics["svm_c"] = out.svm.C;
  out.result.metrics["val_accuracy"] = best_val;
  return out;
}

void write_run(const std::filesystem::path& dir, const RunResult& result, const RunTiming* timing) {
  write_text(dir / "result.json", to_json(result).dump(2) + "\n");
  write_text(dir / "confusion.csv", confusion_csv(result));
  if (timing) write_text(dir / "timing.json", to_json(*timing).dump(2) + "\n");
}

void save_svm(const std::filesystem::path& path, const SvmModel& m) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "svm";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, m.C);
  ckpt.meta["C"] = std::string(buf, ptr);
  ckpt.add("W", m.W);
  ckpt.add("b", m.b);
  save_checkpoint(path, ckpt);
}

SvmModel load_svm(const std::filesystem::path& path) {
  const auto ckpt = load_checkpoint(path);
  if (ckpt.meta_at("kind") != "svm") throw FormatError(path.string() + " does not hold an SVM");
  SvmModel m;
  m.C = std::stod(ckpt.meta_at("C"));
  m.W = ckpt.at("W");
  m.b = ckpt.at("b");
  return m;
}

nlohmann::ordered_json run_ladder(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  if (cfg.ladder_seeds.empty()) throw InputError("ladder: no seeds");
  const Dataset data = synthetic_dataset(cfg);
  const Splits splits = splits_for(data, cfg);

  nlohmann::ordered_json report;
  report["config"] = to_text(cfg);
  report["samples"] = {{"train", splits.train.size()}, {"val", splits.val.size()}, {"test", splits.test.size()}};
  auto runs = nlohmann::ordered_json::array();
  auto timings = nlohmann::ordered_json::array();
  nlohmann::ordered_json summary;
  std::optional<TrainedStream> fusion_rnn;

  for (const auto& variant : cfg.ladder) {
    std::vector<double> accs;
    std::vector<long> steps;
    for (auto seed : cfg.ladder_seeds) {
      RunConfig run_cfg = cfg;
      run_cfg.model = variant;
      run_cfg.seed = seed;
      auto trained = train_stream(data, splits, run_cfg);
      accs.push_back(trained.result.test_accuracy);
      steps.push_back(trained.result.steps_to_threshold);
      runs.push_back(to_json(trained.result));
      timings.push_back(to_json(trained.timing));
      if (out_dir) {
        write_text(*out_dir / "runs" / (variant + "_seed" + std::to_string(seed) + ".csv"),
                   confusion_csv(trained.result));
      }
      if (variant == cfg.fusion_rnn && seed == cfg.ladder_seeds.front()) fusion_rnn = std::move(trained);
    }
    double mean = 0;
    for (double a : accs) mean += a;
    mean /= double(accs.size());
    summary[variant] = {{"mean_test_accuracy", mean}, {"test_accuracy", accs}, {"steps_to_threshold", steps}};
  }
  report["runs"] = runs;
  report["summary"] = summary;

  if (!cfg.fusion_rnn.empty() && !cfg.cnn_model.empty()) {
    RunConfig rnn_cfg = cfg;
    rnn_cfg.model = cfg.fusion_rnn;
    rnn_cfg.seed = cfg.ladder_seeds.front();
    if (!fusion_rnn) {
      fusion_rnn = train_stream(data, splits, rnn_cfg);
      timings.push_back(to_json(fusion_rnn->timing));
    }
    RunConfig cnn_cfg = rnn_cfg;
    cnn_cfg.model = cfg.cnn_model;
    const auto cnn = train_stream(data, splits, cnn_cfg);
    timings.push_back(to_json(cnn.timing));

    const Mat rnn_features = extract_features(fusion_rnn->model, data);
    const Mat cnn_features = extract_features(cnn.model, data);
    const auto decision = fuse_decision(data, splits, fusion_rnn->probs, cnn.probs);
    const auto feature = fuse_features(data, splits, rnn_features, cnn_features, cfg);

    nlohmann::ordered_json fusion;
    fusion["rnn"] = to_json(fusion_rnn->result);
    fusion["cnn"] = to_json(cnn.result);
    fusion["decision"] = to_json(decision);
    fusion["feature"] = to_json(feature.result);
    report["fusion"] = fusion;
    if (out_dir) {
      write_text(*out_dir / "fusion" / "rnn_confusion.csv", confusion_csv(fusion_rnn->result));
      write_text(*out_dir / "fusion" / "cnn_confusion.csv", confusion_csv(cnn.result));
      write_text(*out_dir / "fusion" / "decision_confusion.csv", confusion_csv(decision));
      write_text(*out_dir / "fusion" / "feature_confusion.csv", confusion_csv(feature.result));
    }
  }

  if (out_dir) {
    write_text(*out_dir / "ladder.json", report.dump(2) + "\n");
    write_text(*out_dir / "timing.json", timings.dump(2) + "\n");
  }
  return report;
}

}  // namespace twostream
