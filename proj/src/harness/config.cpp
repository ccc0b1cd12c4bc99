#include "twostream/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace twostream {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw InputError("config: bad value '" + text + "' for key '" + key + "'");
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw InputError("config: key '" + key + "' expects true/false, got '" + text + "'");
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string s;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) s += ",";
    if constexpr (std::is_same_v<T, std::string>) {
      s += items[i];
    } else {
      s += std::to_string(items[i]);
    }
  }
  return s;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& key, const std::string& text) {
  std::vector<std::pair<int, int>> out;
  for (const auto& item : split(text, ',')) {
    const auto parts = split(item, '-');
    if (parts.size() != 2) throw InputError("config: key '" + key + "' expects pairs like 0-1, got '" + item + "'");
    out.emplace_back(parse_number<int>(key, parts[0]), parse_number<int>(key, parts[1]));
  }
  return out;
}

std::string join_pairs(const std::vector<std::pair<int, int>>& pairs) {
  std::string s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    s += (i ? "," : "") + std::to_string(pairs[i].first) + "-" + std::to_string(pairs[i].second);
  }
  return s;
}

struct Entry {
  ConfigKey key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define NUM(field, T)                                                                                 \
  [](RunConfig& c, const std::string& v) { c.field = parse_number<T>(#field, v); },                  \
      [](const RunConfig& c) { return std::is_floating_point_v<T> ? fmt(double(c.field)) : std::to_string(c.field); }

#define SYN(field, T)                                                                                 \
  [](RunConfig& c, const std::string& v) { c.synth.field = parse_number<T>(#field, v); },            \
      [](const RunConfig& c) {                                                                        \
        return std::is_floating_point_v<T> ? fmt(double(c.synth.field)) : std::to_string(c.synth.field); \
      }

#define FLAG(field)                                                                       \
  [](RunConfig& c, const std::string& v) { c.field = parse_bool(#field, v); },           \
      [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }

#define STR(field) \
  [](RunConfig& c, const std::string& v) { c.field = v; }, [](const RunConfig& c) { return c.field; }

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {{"model", "ladder variant to train (RNN1 ... BI-GRU2-BN-DP-H, C3D, C3D-DESK)"}, STR(model)},
      {{"seed", "seed for initialization, batching and dropout"}, NUM(seed, std::uint64_t)},
      {{"hidden", "recurrent width per direction (full scale: 300)"}, NUM(hidden, Index)},
      {{"batch", "mini-batch size (full scale: 1000 one-layer, 650 two-layer)"}, NUM(batch, Index)},
      {{"epochs", "training epochs (desk scale keeps this <= 50)"}, NUM(epochs, int)},
      {{"optimizer", "rmsprop or sgd-halving (full-scale CNN: sgd-halving, lr 1e-4)"}, STR(optimizer)},
      {{"learning_rate", "initial learning rate (full-scale RNN: 0.001)"}, NUM(learning_rate, double)},
      {{"decay", "RMSprop squared-gradient decay (full scale: 0.9)"}, NUM(decay, double)},
      {{"momentum", "RMSprop momentum (full scale: 0)"}, NUM(momentum, double)},
      {{"patience", "sgd-halving: validation checks without improvement before halving"}, NUM(patience, int)},
      {{"keep_prob", "dropout keep probability (full scale: 0.75)"}, NUM(keep_prob, double)},
      {{"bn_momentum", "batchnorm running-statistics momentum (library default 0.99)"}, NUM(bn_momentum, double)},
      {{"gru_update_bias", "initial GRU update-gate bias; 1 keeps state early in training like the LSTM forget bias"},
       NUM(gru_update_bias, double)},
      {{"bn_refresh", "stat-only passes over the training batches refreshing BN running stats before evaluation"},
       NUM(bn_refresh, int)},
      {{"pad_to", "pad skeleton batches to this many steps, 0 = longest in batch (full scale: 300)"},
       NUM(pad_to, Index)},
      {{"eval_every", "optimizer steps between validation checks, 0 = once per epoch"}, NUM(eval_every, int)},
      {{"threshold", "validation accuracy defining steps-to-threshold"}, NUM(threshold, double)},
      {{"keep_best", "restore the parameters with the best validation accuracy after training"}, FLAG(keep_best)},
      {{"clip_len", "frames per video clip (full scale: 16)"}, NUM(clip_len, Index)},
      {{"crop", "square crop side for video clips, 0 = no crop (full scale: 112 from 128x171)"}, NUM(crop, Index)},
      {{"svm_c", "SVM C when svm_search is false (full scale: 8.0)"}, NUM(svm_c, double)},
      {{"svm_search", "choose SVM C from powers of two on the validation split"}, FLAG(svm_search)},
      {{"svm_epochs", "SVM subgradient epochs"}, NUM(svm_epochs, int)},
      {{"split", "cross-subject or cross-view"},
       [](RunConfig& c, const std::string& v) { c.split = parse_split_mode(v); },
       [](const RunConfig& c) { return split_mode_name(c.split); }},
      {{"val_fraction", "fraction of training-side subjects held out for validation"}, NUM(val_fraction, double)},
      {{"split_seed", "seed for the subject/view shuffle"}, NUM(split_seed, std::uint64_t)},
      {{"data_seed", "seed for synthetic data generation"}, NUM(data_seed, std::uint64_t)},
      {{"classes", "synthetic: number of classes (full scale: 60)"}, SYN(classes, int)},
      {{"samples_per_class", "synthetic: samples per class"}, SYN(samples_per_class, int)},
      {{"t_min", "synthetic: shortest skeleton sequence"}, SYN(t_min, Index)},
      {{"t_max", "synthetic: longest skeleton sequence"}, SYN(t_max, Index)},
      {{"persons", "synthetic: persons per skeleton frame (full scale: 2)"}, SYN(persons, int)},
      {{"joints", "synthetic: joints per person (full scale: 25)"}, SYN(joints, int)},
      {{"subjects", "synthetic: number of subjects (full scale: 40)"}, SYN(subjects, int)},
      {{"views", "synthetic: number of camera views (full scale: 3)"}, SYN(views, int)},
      {{"video_channels", "synthetic: video channels"}, SYN(video_channels, Index)},
      {{"video_frames", "synthetic: frames per video"}, SYN(video_frames, Index)},
      {{"video_height", "synthetic: frame height"}, SYN(video_height, Index)},
      {{"video_width", "synthetic: frame width"}, SYN(video_width, Index)},
      {{"skeleton_noise", "synthetic: per-coordinate jitter"}, SYN(skeleton_noise, double)},
      {{"origin_jitter", "synthetic: per-sample body offset range"}, SYN(origin_jitter, double)},
      {{"stroke_amplitude", "synthetic: signature stroke length"}, SYN(stroke_amplitude, double)},
      {{"distractor_amplitude", "synthetic: mid-sequence distractor stroke length"},
       SYN(distractor_amplitude, double)},
      {{"video_noise", "synthetic: per-pixel noise"}, SYN(video_noise, double)},
      {{"video_contrast", "synthetic: grating contrast"}, SYN(video_contrast, double)},
      {{"skeleton_shared", "synthetic: class pairs sharing a skeleton signature, e.g. 0-1"},
       [](RunConfig& c, const std::string& v) { c.synth.skeleton_shared = parse_pairs("skeleton_shared", v); },
       [](const RunConfig& c) { return join_pairs(c.synth.skeleton_shared); }},
      {{"video_shared", "synthetic: class pairs sharing a video signature, e.g. 2-3"},
       [](RunConfig& c, const std::string& v) { c.synth.video_shared = parse_pairs("video_shared", v); },
       [](const RunConfig& c) { return join_pairs(c.synth.video_shared); }},
      {{"ladder", "ladder: comma-separated variants to compare"},
       [](RunConfig& c, const std::string& v) { c.ladder = split(v, ','); },
       [](const RunConfig& c) { return join(c.ladder); }},
      {{"ladder_seeds", "ladder: comma-separated training seeds"},
       [](RunConfig& c, const std::string& v) {
         c.ladder_seeds.clear();
         for (const auto& s : split(v, ',')) c.ladder_seeds.push_back(parse_number<std::uint64_t>("ladder_seeds", s));
       },
       [](const RunConfig& c) { return join(c.ladder_seeds); }},
      {{"cnn_model", "ladder: video stream variant used for fusion"}, STR(cnn_model)},
      {{"fusion_rnn", "ladder: skeleton stream variant used for fusion"}, STR(fusion_rnn)},
  };
  return table;
}

#undef NUM
#undef SYN
#undef FLAG
#undef STR

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> out;
    for (const auto& e : entries()) out.push_back(e.key);
    return out;
  }();
  return keys;
}

void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& e : entries()) {
    if (e.key.name == key) {
      e.set(cfg, value);
      return;
    }
  }
  throw InputError("config: unknown key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    apply_setting(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& e : entries()) out += e.key.name + " = " + e.get(cfg) + "\n";
  return out;
}

}  // namespace twostream
