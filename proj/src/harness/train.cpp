#include "twostream/harness/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>

namespace twostream {
namespace {

using Clock = std::chrono::steady_clock;

double accuracy_on(Stream& stream, const Dataset& data, std::span<const int> indices) {
  if (indices.empty()) return 0.0;
  const auto predicted = argmax_rows(stream.predict(data, indices));
  long correct = 0;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    correct += predicted[i] == data.samples[std::size_t(indices[i])].label();
  }
  return double(correct) / double(indices.size());
}

/// Consecutive chunks of `order`; a trailing single sample joins the previous
/// chunk so batch statistics always see at least two rows.
std::vector<std::span<const int>> make_batches(const std::vector<int>& order, Index batch) {
  std::vector<std::span<const int>> out;
  const std::size_t size = std::size_t(std::max<Index>(batch, 2));
  for (std::size_t begin = 0; begin < order.size(); begin += size) {
    const std::size_t count = std::min(size, order.size() - begin);
    if (count < 2 && !out.empty()) {
      out.back() = std::span<const int>(out.back().data(), out.back().size() + count);
    } else {
      out.emplace_back(order.data() + begin, count);
    }
  }
  return out;
}

}  // namespace

Confusion confusion_matrix(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) throw DimensionError("confusion: label counts differ");
  Confusion c(std::size_t(classes), std::vector<long>(std::size_t(classes), 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw InputError("confusion: label out of range");
    }
    ++c[std::size_t(truth[i])][std::size_t(predicted[i])];
  }
  return c;
}

double confusion_accuracy(const Confusion& c) {
  long trace = 0, total = 0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    trace += c[i][i];
    for (long v : c[i]) total += v;
  }
  return total == 0 ? 0.0 : double(trace) / double(total);
}

std::vector<int> argmax_rows(const MatRef& scores) {
  std::vector<int> out;
  out.reserve(std::size_t(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) out.push_back(argmax_row(scores.row(r)));
  return out;
}

double RunTiming::mean_step_seconds() const {
  if (step_seconds.empty()) return 0.0;
  double s = 0;
  for (double v : step_seconds) s += v;
  return s / double(step_seconds.size());
}

RunResult train(Stream& stream, const Dataset& data, const Splits& splits, const RunConfig& cfg, RunTiming* timing) {
  if (splits.train.empty()) throw InputError("train: the training split is empty");
  if (cfg.epochs < 0) throw InputError("train: epochs must be non-negative");
  RunResult result;
  result.model = stream.name();
  result.split = split_mode_name(cfg.split);
  result.seed = cfg.seed;
  result.class_names = data.class_names();
  result.threshold = cfg.threshold;

  std::optional<Rmsprop> rmsprop;
  std::optional<SgdHalving> sgd;
  if (cfg.optimizer == "rmsprop") {
    rmsprop.emplace(RmspropConfig{cfg.learning_rate, cfg.decay, cfg.momentum, 1e-8});
  } else if (cfg.optimizer == "sgd-halving") {
    sgd.emplace(SgdHalvingConfig{cfg.learning_rate, cfg.patience});
  } else {
    throw InputError("unknown optimizer '" + cfg.optimizer + "'");
  }

  Rng rng(cfg.seed ^ 0xB47C4ED5ULL);
  std::vector<int> order = splits.train;
  std::optional<Checkpoint> best;
  double best_val = -1;
  const auto start = Clock::now();

  // Running stats lag fast-moving weights; re-estimate them with the current
  // weights (same EMA rule, no optimizer step) before each evaluation.
  auto refresh = [&] {
    for (int pass = 0; pass < cfg.bn_refresh; ++pass) {
      for (auto batch : make_batches(order, cfg.batch)) stream.refresh_statistics(data, batch);
    }
  };
  auto validate = [&] {
    refresh();
    return accuracy_on(stream, data, splits.val);
  };

  auto check_validation = [&](double acc) {
    result.val_curve.push_back({result.steps, acc});
    if (result.steps_to_threshold < 0 && acc >= cfg.threshold) result.steps_to_threshold = result.steps;
  };

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double loss_sum = 0;
    std::size_t seen = 0;
    for (auto batch : make_batches(order, cfg.batch)) {
      const auto t0 = Clock::now();
      const double loss = stream.train_batch(data, batch, rng);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training diverged: " + result.model + " loss is " + std::to_string(loss) +
                              " at epoch " + std::to_string(epoch) + ", step " + std::to_string(result.steps) +
                              " (learning rate " + std::to_string(cfg.learning_rate) + ")");
      }
      const auto params = stream.params();
      if (rmsprop) {
        rmsprop->step(params);
      } else {
        sgd->step(params);
      }
      ++result.steps;
      if (timing) timing->step_seconds.push_back(std::chrono::duration<double>(Clock::now() - t0).count());
      loss_sum += loss * double(batch.size());
      seen += batch.size();
      if (cfg.eval_every > 0 && result.steps % cfg.eval_every == 0) {
        check_validation(validate());
      }
    }
    result.epoch_loss.push_back(loss_sum / double(seen));
    const double val = validate();
    result.val_accuracy.push_back(val);
    if (cfg.eval_every <= 0) check_validation(val);
    if (sgd) sgd->observe(val);
    if (cfg.keep_best && val > best_val) {
      best_val = val;
      best = stream.checkpoint();
      result.best_epoch = epoch;
    }
  }
  if (best) {
    stream.restore(*best);
  } else {
    refresh();
  }

  const auto test = evaluate_scores(result.model, data, splits.test, stream.predict(data, splits.test));
  result.test_accuracy = test.test_accuracy;
  result.confusion = test.confusion;
  if (timing) {
    timing->model = result.model;
    timing->total_seconds = std::chrono::duration<double>(Clock::now() - start).count();
  }
  return result;
}

RunResult evaluate_labels(const std::string& name, const Dataset& data, std::span<const int> indices,
                          std::span<const int> predicted) {
  RunResult r;
  r.model = name;
  r.class_names = data.class_names();
  const auto truth = data.labels(indices);
  r.confusion = confusion_matrix(truth, predicted, data.num_classes);
  r.test_accuracy = confusion_accuracy(r.confusion);
  return r;
}

RunResult evaluate_scores(const std::string& name, const Dataset& data, std::span<const int> indices,
                          const MatRef& scores) {
  if (scores.rows() != Index(indices.size()) || scores.cols() != data.num_classes) {
    throw DimensionError("evaluate: expected " + std::to_string(indices.size()) + " x " +
                         std::to_string(data.num_classes) + " scores, got " + std::to_string(scores.rows()) +
                         " x " + std::to_string(scores.cols()));
  }
  return evaluate_labels(name, data, indices, argmax_rows(scores));
}

nlohmann::ordered_json to_json(const RunResult& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["split"] = r.split;
  j["seed"] = r.seed;
  j["classes"] = r.class_names;
  j["steps"] = r.steps;
  j["epoch_loss"] = r.epoch_loss;
  j["val_accuracy"] = r.val_accuracy;
  auto curve = nlohmann::ordered_json::array();
  for (const auto& p : r.val_curve) curve.push_back({p.step, p.accuracy});
  j["val_curve"] = curve;
  j["threshold"] = r.threshold;
  j["steps_to_threshold"] = r.steps_to_threshold;
  j["best_epoch"] = r.best_epoch;
  j["test_accuracy"] = r.test_accuracy;
  j["confusion"] = r.confusion;
  nlohmann::ordered_json metrics = nlohmann::ordered_json::object();
  for (const auto& [k, v] : r.metrics) metrics[k] = v;
  j["metrics"] = metrics;
  return j;
}

nlohmann::ordered_json to_json(const RunTiming& t) {
  nlohmann::ordered_json j;
  j["model"] = t.model;
  j["steps"] = t.step_seconds.size();
  j["mean_step_seconds"] = t.mean_step_seconds();
  j["total_seconds"] = t.total_seconds;
  j["step_seconds"] = t.step_seconds;
  return j;
}

std::string confusion_csv(const RunResult& r) {
  std::ostringstream os;
  os << "true\\predicted";
  for (const auto& name : r.class_names) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < r.confusion.size(); ++i) {
    os << (i < r.class_names.size() ? r.class_names[i] : std::to_string(i));
    for (long v : r.confusion[i]) os << ',' << v;
    os << '\n';
  }
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace twostream
