#include "twostream/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "twostream/tensor_io.hpp"

namespace twostream {

std::vector<int> Dataset::labels(std::span<const int> indices) const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int i : indices) out.push_back(samples.at(std::size_t(i)).label());
  return out;
}

std::vector<std::string> Dataset::class_names() const {
  std::vector<std::string> names;
  for (int k = 0; k < num_classes; ++k) names.push_back("class_" + std::to_string(k));
  return names;
}

SequenceBatch pad_sequences(std::span<const Tensor* const> tracks, Index t_max) {
  if (tracks.empty()) throw InputError("pad_sequences: no sequences");
  const Index width = tracks.front()->size() / std::max<Index>(tracks.front()->dim(0), 1);
  const Index n = Index(tracks.size());
  SequenceBatch batch{Tensor({n, t_max, width}), std::vector<Index>(tracks.size())};
  for (Index s = 0; s < n; ++s) {
    const Tensor& t = *tracks[std::size_t(s)];
    const Index len = t.dim(0);
    if (len < 1) throw InputError("pad_sequences: empty sequence");
    if (len > t_max) {
      throw InputError("pad_sequences: sequence of length " + std::to_string(len) + " exceeds T_max " +
                       std::to_string(t_max));
    }
    if (t.size() != len * width) throw DimensionError("pad_sequences: sequences have different widths");
    std::copy(t.data(), t.data() + t.size(), batch.data.data() + s * t_max * width);
    batch.lengths[std::size_t(s)] = len;
  }
  return batch;
}

SequenceBatch pad_sequences(std::span<const Tensor> tracks, Index t_max) {
  std::vector<const Tensor*> ptrs;
  for (const auto& t : tracks) ptrs.push_back(&t);
  return pad_sequences(std::span<const Tensor* const>(ptrs), t_max);
}

SplitMode parse_split_mode(const std::string& name) {
  if (name == "cross_subject") return SplitMode::CrossSubject;
  if (name == "cross_view") return SplitMode::CrossView;
  throw InputError("unknown split mode '" + name + "'");
}

std::string split_mode_name(SplitMode mode) {
  return mode == SplitMode::CrossSubject ? "cross_subject" : "cross_view";
}

Splits make_splits(const Dataset& data, const SplitSpec& spec, Rng& rng) {
  std::set<int> subject_set, view_set;
  for (const auto& s : data.samples) {
    subject_set.insert(s.skeleton.subject);
    view_set.insert(s.skeleton.view);
  }
  std::vector<int> subjects(subject_set.begin(), subject_set.end());
  std::vector<int> views(view_set.begin(), view_set.end());
  if (subjects.size() < 2) throw InputError("make_splits: need at least 2 subjects");
  if (spec.mode == SplitMode::CrossView && views.size() < 2) throw InputError("make_splits: cross_view needs at least 2 views");

  std::set<int> train_subjects;
  int test_view = -1;
  if (spec.mode == SplitMode::CrossSubject) {
    rng.shuffle(std::span<int>(subjects));
    const std::size_t half = (subjects.size() + 1) / 2;
    train_subjects.insert(subjects.begin(), subjects.begin() + std::ptrdiff_t(half));
  } else {
    rng.shuffle(std::span<int>(views));
    test_view = views.front();
    for (const auto& s : data.samples) {
      if (s.skeleton.view != test_view) train_subjects.insert(s.skeleton.subject);
    }
  }

  std::vector<int> train_side(train_subjects.begin(), train_subjects.end());
  const auto n_val = std::max<std::size_t>(1, std::size_t(std::ceil(spec.val_fraction * double(train_side.size()))));
  if (n_val >= train_side.size()) {
    throw InputError("make_splits: " + std::to_string(train_side.size()) +
                     " training-side subjects leave none for training after the validation carve-out");
  }
  rng.shuffle(std::span<int>(train_side));
  const std::set<int> val_subjects(train_side.begin(), train_side.begin() + std::ptrdiff_t(n_val));

  Splits out;
  for (int i = 0; i < int(data.samples.size()); ++i) {
    const auto& sk = data.samples[std::size_t(i)].skeleton;
    const bool train_side_sample = spec.mode == SplitMode::CrossSubject ? train_subjects.count(sk.subject) > 0
                                                                        : sk.view != test_view;
    if (!train_side_sample) {
      out.test.push_back(i);
    } else if (val_subjects.count(sk.subject)) {
      out.val.push_back(i);
    } else {
      out.train.push_back(i);
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "skeleton");
  fs::create_directories(dir / "video");
  std::ofstream manifest(dir / "manifest.tsv");
  if (!manifest) throw FormatError("cannot write " + (dir / "manifest.tsv").string());
  manifest << "sample_id\tlabel\tsubject\tview\tskeleton_path\tvideo_path\n";
  manifest << "#classes\t" << data.num_classes << "\n";
  for (const auto& s : data.samples) {
    const std::string sk = "skeleton/" + std::to_string(s.id) + ".tsr";
    const std::string vid = "video/" + std::to_string(s.id) + ".tsr";
    save_tsr(dir / sk, s.skeleton.coords);
    save_tsr(dir / vid, s.video.pixels);
    manifest << s.id << '\t' << s.label() << '\t' << s.skeleton.subject << '\t' << s.skeleton.view << '\t' << sk
             << '\t' << vid << '\n';
  }
}

Dataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream manifest(dir / "manifest.tsv");
  if (!manifest) throw FormatError("no manifest.tsv in " + dir.string());
  std::string line;
  std::getline(manifest, line);
  if (line.rfind("sample_id\t", 0) != 0) throw FormatError("manifest.tsv: bad header");
  Dataset data;
  int max_label = -1;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string key;
      ls >> key;
      if (key == "#classes") ls >> data.num_classes;
      continue;
    }
    Sample s;
    std::string sk, vid;
    if (!(ls >> s.id >> s.skeleton.label >> s.skeleton.subject >> s.skeleton.view >> sk >> vid)) {
      throw FormatError("manifest.tsv: bad row '" + line + "'");
    }
    s.video.label = s.skeleton.label;
    s.video.subject = s.skeleton.subject;
    s.video.view = s.skeleton.view;
    s.skeleton.coords = load_tsr(dir / sk);
    s.video.pixels = load_tsr(dir / vid);
    max_label = std::max(max_label, s.skeleton.label);
    data.samples.push_back(std::move(s));
  }
  data.num_classes = std::max(data.num_classes, max_label + 1);
  return data;
}

}  // namespace twostream
