#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "twostream/harness/streams.hpp"

namespace twostream {

using Confusion = std::vector<std::vector<long>>;  // [true][predicted]

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes);
/// trace / sum, computed from the matrix itself.
double confusion_accuracy(const Confusion& c);
std::vector<int> argmax_rows(const MatRef& scores);

struct EvalPoint {
  long step = 0;
  double accuracy = 0;
};

/// Everything a run reports. Deterministic given the seed and config; wall
/// clock lives in RunTiming so that two identical runs serialize identically.
struct RunResult {
  std::string model;
  std::string split;
  std::uint64_t seed = 0;
  std::vector<std::string> class_names;
  long steps = 0;
  std::vector<double> epoch_loss;
  std::vector<double> val_accuracy;  // after each epoch
  std::vector<EvalPoint> val_curve;  // every eval_every steps
  double threshold = 0;
  long steps_to_threshold = -1;  // -1: never reached
  int best_epoch = -1;
  double test_accuracy = 0;
  Confusion confusion;
  std::map<std::string, double> metrics;  // run-specific scalars (trust weights, SVM C, ...)
};

struct RunTiming {
  std::string model;
  std::vector<double> step_seconds;
  double total_seconds = 0;
  double mean_step_seconds() const;
};

/// Trains `stream` on splits.train, tracks validation accuracy, restores the
/// best-validation weights if cfg.keep_best, and evaluates on splits.test.
/// A non-finite loss aborts with DivergenceError.
RunResult train(Stream& stream, const Dataset& data, const Splits& splits, const RunConfig& cfg,
                RunTiming* timing = nullptr);

/// Test-set evaluation of already computed class scores (one row per index).
RunResult evaluate_scores(const std::string& name, const Dataset& data, std::span<const int> indices,
                          const MatRef& scores);
RunResult evaluate_labels(const std::string& name, const Dataset& data, std::span<const int> indices,
                          std::span<const int> predicted);

nlohmann::ordered_json to_json(const RunResult& r);
nlohmann::ordered_json to_json(const RunTiming& t);
/// K x K with a header row of class names; rows are true classes.
std::string confusion_csv(const RunResult& r);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace twostream
