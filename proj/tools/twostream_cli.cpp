// Command-line surface: data generation, training, extraction, fusion,
// evaluation, gradient checks and the full ladder comparison.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "twostream/harness/gradcheck.hpp"
#include "twostream/harness/pipeline.hpp"
#include "twostream/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace twostream;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "config file of 'key = value' lines");
  cmd->add_option("--set", c.sets, "override one key, e.g. --set epochs=10 (repeatable)");
}

RunConfig resolve(const Common& c) {
  RunConfig cfg = c.config.empty() ? RunConfig{} : load_config(c.config);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw InputError("--set expects key=value, got '" + kv + "'");
    apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

Splits load_splits(const Dataset& data, const RunConfig& cfg) { return splits_for(data, cfg); }

const std::vector<int>& pick(const Splits& s, const std::string& name) {
  if (name == "train") return s.train;
  if (name == "val") return s.val;
  if (name == "test") return s.test;
  throw InputError("unknown split '" + name + "' (train, val or test)");
}

void print_result(const RunResult& r) {
  std::cout << r.model << " " << r.split << " test_accuracy " << r.test_accuracy << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stream skeleton/video action recognition toolkit"};
  app.require_subcommand(1);

  Common common;
  std::string data_dir, out, model_path, rnn_path, cnn_path, features_path, split_name = "test";

  auto* gen = app.add_subcommand("gen-data", "generate the paired synthetic dataset");
  add_common(gen, common);
  gen->add_option("-o,--out", out, "dataset directory")->required();

  auto* train_cmd = app.add_subcommand("train", "train one model (cfg.model) and score every sample");
  add_common(train_cmd, common);
  train_cmd->add_option("-d,--data", data_dir, "dataset directory")->required();
  train_cmd->add_option("-o,--out", out, "run directory")->required();

  auto* extract = app.add_subcommand("extract", "feature-tap rows for every sample as TSR1");
  add_common(extract, common);
  extract->add_option("-d,--data", data_dir, "dataset directory")->required();
  extract->add_option("-m,--model", model_path, "model checkpoint")->required();
  extract->add_option("-o,--out", out, "output .tsr file")->required();

  auto* fuse_dec = app.add_subcommand("fuse-decision", "trust-weighted decision fusion of two probability files");
  add_common(fuse_dec, common);
  fuse_dec->add_option("-d,--data", data_dir, "dataset directory")->required();
  fuse_dec->add_option("--rnn", rnn_path, "skeleton-stream probabilities (.tsr)")->required();
  fuse_dec->add_option("--cnn", cnn_path, "video-stream probabilities (.tsr)")->required();
  fuse_dec->add_option("-o,--out", out, "run directory")->required();

  auto* fuse_feat = app.add_subcommand("fuse-feature", "linear SVM on concatenated, normalized features");
  add_common(fuse_feat, common);
  fuse_feat->add_option("-d,--data", data_dir, "dataset directory")->required();
  fuse_feat->add_option("--rnn", rnn_path, "skeleton-stream features (.tsr)")->required();
  fuse_feat->add_option("--cnn", cnn_path, "video-stream features (.tsr)")->required();
  fuse_feat->add_option("-o,--out", out, "run directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a stream model, or an SVM on fused features, on one split");
  add_common(eval, common);
  eval->add_option("-d,--data", data_dir, "dataset directory")->required();
  eval->add_option("-m,--model", model_path, "stream or SVM checkpoint")->required();
  eval->add_option("-f,--features", features_path, "fused features (.tsr), required for an SVM checkpoint");
  eval->add_option("-s,--split", split_name, "train, val or test");
  eval->add_option("-o,--out", out, "run directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every layer type");
  std::uint64_t grad_seed = 1;
  grad->add_option("--seed", grad_seed, "seed for the random shapes and values");

  auto* ladder = app.add_subcommand("ladder", "every ladder variant over the seeds, then both fusions");
  add_common(ladder, common);
  ladder->add_option("-o,--out", out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const RunConfig cfg = resolve(common);
      const Dataset data = synthetic_dataset(cfg);
      write_dataset(out, data);
      std::cout << "wrote " << data.samples.size() << " samples to " << out << "\n";
    } else if (train_cmd->parsed()) {
      const RunConfig cfg = resolve(common);
      const Dataset data = read_dataset(data_dir);
      const auto trained = train_stream(data, load_splits(data, cfg), cfg);
      fs::create_directories(out);
      write_run(out, trained.result, &trained.timing);
      save_checkpoint(fs::path(out) / "model.ckpt", trained.model);
      save_tsr(fs::path(out) / "probs.tsr", Tensor::from_matrix(trained.probs));
      write_text(fs::path(out) / "config.txt", to_text(cfg));
      print_result(trained.result);
    } else if (extract->parsed()) {
      const Dataset data = read_dataset(data_dir);
      const Mat rows = extract_features(load_checkpoint(model_path), data);
      save_tsr(out, Tensor::from_matrix(rows));
      std::cout << "wrote " << rows.rows() << " x " << rows.cols() << " features to " << out << "\n";
    } else if (fuse_dec->parsed()) {
      const RunConfig cfg = resolve(common);
      const Dataset data = read_dataset(data_dir);
      const Tensor rnn = load_tsr(rnn_path), cnn = load_tsr(cnn_path);
      const auto result = fuse_decision(data, load_splits(data, cfg), rnn.matrix(), cnn.matrix());
      write_run(out, result);
      print_result(result);
    } else if (fuse_feat->parsed()) {
      const RunConfig cfg = resolve(common);
      const Dataset data = read_dataset(data_dir);
      const Tensor rnn = load_tsr(rnn_path), cnn = load_tsr(cnn_path);
      const auto fused = fuse_features(data, load_splits(data, cfg), rnn.matrix(), cnn.matrix(), cfg);
      write_run(out, fused.result);
      save_svm(fs::path(out) / "svm.ckpt", fused.svm);
      save_tsr(fs::path(out) / "fused.tsr", Tensor::from_matrix(fused.fused));
      print_result(fused.result);
    } else if (eval->parsed()) {
      const RunConfig cfg = resolve(common);
      const Dataset data = read_dataset(data_dir);
      const Splits splits = load_splits(data, cfg);
      const auto& indices = pick(splits, split_name);
      const Checkpoint ckpt = load_checkpoint(model_path);
      RunResult result;
      if (ckpt.meta_at("kind") == "svm") {
        if (features_path.empty()) throw InputError("eval: an SVM checkpoint needs --features");
        const Tensor all = load_tsr(features_path);
        Mat rows(Index(indices.size()), all.matrix().cols());
        for (std::size_t i = 0; i < indices.size(); ++i) rows.row(Index(i)) = all.matrix().row(indices[i]);
        result = evaluate_labels("SVM", data, indices, svm_predict(load_svm(model_path), rows).labels);
      } else {
        auto stream = load_stream(ckpt);
        result = evaluate_scores(stream->name(), data, indices, stream->predict(data, indices));
      }
      result.split = split_mode_name(cfg.split) + "/" + split_name;
      write_run(out, result);
      print_result(result);
    } else if (grad->parsed()) {
      Rng rng(grad_seed);
      const auto report = gradcheck_all(rng);
      std::cout << report.text();
      return report.passed() ? 0 : 1;
    } else if (ladder->parsed()) {
      const RunConfig cfg = resolve(common);
      const auto report = run_ladder(cfg, fs::path(out));
      for (const auto& [name, s] : report["summary"].items()) {
        std::cout << name << " mean_test_accuracy " << s["mean_test_accuracy"] << " steps_to_threshold "
                  << s["steps_to_threshold"] << "\n";
      }
      if (report.contains("fusion")) {
        for (const char* k : {"rnn", "cnn", "decision", "feature"}) {
          std::cout << "fusion." << k << " test_accuracy " << report["fusion"][k]["test_accuracy"] << "\n";
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
