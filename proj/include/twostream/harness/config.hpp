#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "twostream/data.hpp"
#include "twostream/synth.hpp"

namespace twostream {

/// Every knob of a run. Defaults are the desk-scale values; the comments on
/// each key in `config_keys()` give the original full-scale settings.
struct RunConfig {
  std::string model = "LSTM1";
  std::uint64_t seed = 42;
  Index hidden = 32;
  Index batch = 32;
  int epochs = 30;
  std::string optimizer = "rmsprop";  // rmsprop | sgd-halving
  double learning_rate = 0.001;
  double decay = 0.9;
  double momentum = 0.0;
  int patience = 3;
  double keep_prob = 0.75;
  double bn_momentum = 0.9;
  double gru_update_bias = 0.0;
  int bn_refresh = 2;  // stat-only passes over the training batches before each evaluation
  Index pad_to = 0;  // 0: pad each batch to its longest sequence
  int eval_every = 0;  // optimizer steps between validation checks, 0 = once per epoch
  double threshold = 0.6;
  bool keep_best = true;
  Index clip_len = 16;
  Index crop = 0;  // 0: no cropping
  double svm_c = 8.0;
  bool svm_search = true;
  int svm_epochs = 200;
  SplitMode split = SplitMode::CrossSubject;
  double val_fraction = 0.1;
  std::uint64_t split_seed = 7;
  std::uint64_t data_seed = 1;
  SynthConfig synth;
  std::vector<std::string> ladder{"RNN1", "LSTM1", "LSTM1-BN", "LSTM1-BN-DP", "GRU1-BN-DP",
                                  "BI-GRU1-BN-DP", "BI-GRU2-BN-DP", "BI-GRU2-BN-DP-H"};
  std::vector<std::uint64_t> ladder_seeds{42, 43, 44};
  std::string cnn_model = "C3D-DESK";
  std::string fusion_rnn = "BI-GRU2-BN-DP-H";
};

struct ConfigKey {
  std::string name;
  std::string help;
};

/// The documented keys, in file order.
const std::vector<ConfigKey>& config_keys();

/// Sets one key from its text value; unknown keys and malformed values are InputErrors.
void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value);

/// Flat `key = value` lines; `#` starts a comment, blank lines are skipped.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

/// Canonical text form, one line per key; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig& cfg);

}  // namespace twostream
