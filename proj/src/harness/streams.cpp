#include "twostream/harness/streams.hpp"

#include <algorithm>

namespace twostream {
namespace {

constexpr Index kInferenceChunk = 64;

template <typename F>
Mat chunked_rows(std::span<const int> indices, Index cols, F&& run) {
  Mat out(Index(indices.size()), cols);
  for (std::size_t begin = 0; begin < indices.size(); begin += kInferenceChunk) {
    const std::size_t count = std::min<std::size_t>(kInferenceChunk, indices.size() - begin);
    out.middleRows(Index(begin), Index(count)) = run(indices.subspan(begin, count));
  }
  return out;
}

}  // namespace

Index longest_sequence(const Dataset& data) {
  Index t = 0;
  for (const auto& s : data.samples) t = std::max(t, s.skeleton.length());
  return t;
}

// ---------------------------------------------------------------------------

SkeletonStream::SkeletonStream(SkeletonModel model, Index pad_to) : model_(std::move(model)), pad_to_(pad_to) {}

SequenceBatch SkeletonStream::batch_of(const Dataset& data, std::span<const int> indices) const {
  std::vector<const Tensor*> tracks;
  Index longest = 0;
  for (int i : indices) {
    const auto& seq = data.samples.at(std::size_t(i)).skeleton;
    tracks.push_back(&seq.coords);
    longest = std::max(longest, seq.length());
  }
  return pad_sequences(tracks, pad_to_ > 0 ? pad_to_ : longest);
}

double SkeletonStream::train_batch(const Dataset& data, std::span<const int> indices, Rng& rng) {
  const auto batch = batch_of(data, indices);
  auto out = model_.forward(batch, Mode::Train, rng);
  const auto labels = data.labels(indices);
  auto loss = softmax_xent(out.logits, labels);
  model_.backward(out.cache, loss.grad_logits);
  return loss.loss;
}

void SkeletonStream::refresh_statistics(const Dataset& data, std::span<const int> indices) {
  model_.update_statistics(batch_of(data, indices));
}

Mat SkeletonStream::predict(const Dataset& data, std::span<const int> indices) {
  Rng unused(0);
  return chunked_rows(indices, classes(), [&](std::span<const int> part) {
    return softmax_rows(model_.forward(batch_of(data, part), Mode::Inference, unused).logits);
  });
}

Mat SkeletonStream::features(const Dataset& data, std::span<const int> indices) {
  const Index width = model_.feature_width();
  Rng unused(0);
  return chunked_rows(indices, width, [&](std::span<const int> part) {
    return model_.forward(batch_of(data, part), Mode::Inference, unused).features;
  });
}

Checkpoint SkeletonStream::checkpoint() const {
  Checkpoint ckpt;
  model_.save(ckpt);
  ckpt.meta["stream.pad_to"] = std::to_string(pad_to_);
  return ckpt;
}

void SkeletonStream::restore(const Checkpoint& ckpt) { model_ = SkeletonModel::load(ckpt); }

// ---------------------------------------------------------------------------

VideoStream::VideoStream(std::string variant, C3dModel model, Index clip_len, Index crop)
    : variant_(std::move(variant)), model_(std::move(model)), clip_len_(clip_len), crop_(crop) {}

std::pair<Tensor, std::vector<Index>> VideoStream::clips_of(const Dataset& data, std::span<const int> indices,
                                                            Rng* rng) const {
  std::vector<Tensor> clips;
  std::vector<Index> owner;
  for (std::size_t r = 0; r < indices.size(); ++r) {
    for (auto& clip : clip_split(data.samples.at(std::size_t(indices[r])).video.pixels, clip_len_)) {
      if (crop_ > 0) {
        clip = rng ? random_crop(clip, crop_, crop_, *rng) : center_crop(clip, crop_, crop_);
      }
      clips.push_back(std::move(clip));
      owner.push_back(Index(r));
    }
  }
  Shape shape{Index(clips.size())};
  for (Index d : clips.front().shape()) shape.push_back(d);
  Tensor stacked(shape);
  const Index per = clips.front().size();
  for (std::size_t k = 0; k < clips.size(); ++k) {
    std::copy_n(clips[k].data(), per, stacked.data() + Index(k) * per);
  }
  return {std::move(stacked), std::move(owner)};
}

double VideoStream::train_batch(const Dataset& data, std::span<const int> indices, Rng& rng) {
  auto [clips, owner] = clips_of(data, indices, &rng);
  std::vector<int> labels;
  for (Index r : owner) labels.push_back(data.samples.at(std::size_t(indices[std::size_t(r)])).label());
  auto out = model_.forward(clips);
  auto loss = softmax_xent(out.logits, labels);
  model_.backward(out.cache, loss.grad_logits);
  return loss.loss;
}

Mat VideoStream::per_sample(const Dataset& data, std::span<const int> indices, bool features) {
  const Index width = features ? model_.feature_width() : Index(classes());
  return chunked_rows(indices, width, [&](std::span<const int> part) {
    auto [clips, owner] = clips_of(data, part, nullptr);
    auto out = model_.forward(clips);
    const Mat rows = features ? out.fc6 : softmax_rows(out.logits);
    Mat result(Index(part.size()), width);
    Index begin = 0;
    for (Index r = 0; r < Index(part.size()); ++r) {
      Index end = begin;
      while (end < Index(owner.size()) && owner[std::size_t(end)] == r) ++end;
      const auto block = rows.middleRows(begin, end - begin);
      result.row(r) = features ? clip_average_features(block).transpose() : clip_average(block).probs.transpose();
      begin = end;
    }
    return result;
  });
}

Mat VideoStream::predict(const Dataset& data, std::span<const int> indices) {
  return per_sample(data, indices, false);
}

Mat VideoStream::features(const Dataset& data, std::span<const int> indices) {
  return per_sample(data, indices, true);
}

Checkpoint VideoStream::checkpoint() const {
  Checkpoint ckpt;
  model_.save(ckpt);
  ckpt.meta["model"] = variant_;
  ckpt.meta["stream.clip_len"] = std::to_string(clip_len_);
  ckpt.meta["stream.crop"] = std::to_string(crop_);
  return ckpt;
}

void VideoStream::restore(const Checkpoint& ckpt) { model_ = C3dModel::load(ckpt); }

// ---------------------------------------------------------------------------

C3dSpec c3d_spec_for(const std::string& variant, const Dataset& data, const RunConfig& cfg) {
  if (data.samples.empty()) throw InputError("dataset is empty");
  const Tensor& v = data.samples.front().video.pixels;
  const Index h = cfg.crop > 0 ? cfg.crop : v.dim(2);
  const Index w = cfg.crop > 0 ? cfg.crop : v.dim(3);
  if (variant == "C3D-DESK") return C3dSpec::desk(data.num_classes, v.dim(0), cfg.clip_len, h, w);
  if (variant == "C3D") {
    C3dSpec spec = C3dSpec::full(data.num_classes);
    spec.channels = v.dim(0);
    spec.frames = cfg.clip_len;
    spec.height = h;
    spec.width = w;
    return spec;
  }
  throw InputError("unknown video model variant '" + variant + "'");
}

std::unique_ptr<Stream> make_stream(const RunConfig& cfg, const Dataset& data, Rng& rng) {
  if (data.samples.empty()) throw InputError("dataset is empty");
  if (is_cnn_variant(cfg.model)) {
    return std::make_unique<VideoStream>(cfg.model, C3dModel(c3d_spec_for(cfg.model, data, cfg), rng), cfg.clip_len,
                                         cfg.crop);
  }
  SkeletonModelSpec spec;
  spec.name = cfg.model;
  spec.input = data.samples.front().skeleton.width();
  spec.hidden = cfg.hidden;
  spec.classes = data.num_classes;
  spec.keep_prob = cfg.keep_prob;
  spec.bn_momentum = cfg.bn_momentum;
  spec.gru_update_bias = cfg.gru_update_bias;
  return std::make_unique<SkeletonStream>(SkeletonModel(spec, rng), cfg.pad_to);
}

std::unique_ptr<Stream> load_stream(const Checkpoint& ckpt) {
  const auto& kind = ckpt.meta_at("kind");
  if (kind == "skeleton") {
    return std::make_unique<SkeletonStream>(SkeletonModel::load(ckpt), std::stoll(ckpt.meta_at("stream.pad_to")));
  }
  if (kind == "c3d") {
    return std::make_unique<VideoStream>(ckpt.meta_at("model"), C3dModel::load(ckpt),
                                         std::stoll(ckpt.meta_at("stream.clip_len")),
                                         std::stoll(ckpt.meta_at("stream.crop")));
  }
  throw FormatError("checkpoint kind '" + kind + "' is not a stream model");
}

}  // namespace twostream
