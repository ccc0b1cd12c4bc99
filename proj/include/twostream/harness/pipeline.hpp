#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "twostream/harness/train.hpp"

namespace twostream {

Splits splits_for(const Dataset& data, const RunConfig& cfg);
Dataset synthetic_dataset(const RunConfig& cfg);

struct TrainedStream {
  RunResult result;
  RunTiming timing;
  Checkpoint model;
  Mat probs;  // class probabilities for every sample, dataset order
};

/// Builds cfg.model with cfg.seed, trains and evaluates it, and scores every sample.
TrainedStream train_stream(const Dataset& data, const Splits& splits, const RunConfig& cfg);

/// Feature-tap rows for every sample, dataset order.
Mat extract_features(const Checkpoint& model, const Dataset& data);

/// Trust weights searched on validation, applied to test.
RunResult fuse_decision(const Dataset& data, const Splits& splits, const MatRef& rnn_probs, const MatRef& cnn_probs);

struct FeatureFusionOutput {
  RunResult result;
  SvmModel svm;
  Mat fused;  // every sample, dataset order
};

/// Concatenate + L2-normalize, train the SVM on train (C chosen on validation
/// if cfg.svm_search), evaluate on test.
FeatureFusionOutput fuse_features(const Dataset& data, const Splits& splits, const MatRef& rnn_features,
                                  const MatRef& cnn_features, const RunConfig& cfg);

/// Writes result.json, confusion.csv and (if given) timing.json into `dir`.
void write_run(const std::filesystem::path& dir, const RunResult& result, const RunTiming* timing = nullptr);

void save_svm(const std::filesystem::path& path, const SvmModel& m);
SvmModel load_svm(const std::filesystem::path& path);

/// Synthetic data -> every ladder variant for every seed -> both fusion
/// methods on the first seed. Returns the ladder summary; with `out_dir`
/// also writes ladder.json, timing.json and per-run confusion matrices.
nlohmann::ordered_json run_ladder(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {});

}  // namespace twostream
