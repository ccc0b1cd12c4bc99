#include "twostream/c3d.hpp"

#include <sstream>

namespace twostream {
namespace {

std::string conv_name(std::size_t group, std::size_t layer) {
  return "conv" + std::to_string(group + 1) + char('a' + layer);
}

std::string fc_name(std::size_t j) { return "fc" + std::to_string(6 + j); }

Extent3 same_padding(Extent3 k) { return {(k.t - 1) / 2, (k.h - 1) / 2, (k.w - 1) / 2}; }

void relu_inplace(Tensor& t) { t.vector() = t.vector().cwiseMax(Real(0)); }

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<Index> split_indices(const std::string& s) {
  std::vector<Index> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoll(item));
  return out;
}

std::string encode_groups(const std::vector<ConvGroupSpec>& groups) {
  std::string s;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& p = groups[g].pool;
    s += (g ? ";" : "") + join(groups[g].filters) + ":" + std::to_string(p.t) + "x" + std::to_string(p.h) + "x" +
         std::to_string(p.w);
  }
  return s;
}

std::vector<ConvGroupSpec> decode_groups(const std::string& s) {
  std::vector<ConvGroupSpec> groups;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    const auto colon = item.find(':');
    ConvGroupSpec g;
    g.filters = split_indices(item.substr(0, colon));
    char x1 = 0, x2 = 0;
    std::istringstream ps(item.substr(colon + 1));
    ps >> g.pool.t >> x1 >> g.pool.h >> x2 >> g.pool.w;
    groups.push_back(g);
  }
  return groups;
}

}  // namespace

C3dSpec C3dSpec::full(int classes) {
  C3dSpec s;
  s.groups = {{{64}, {1, 2, 2}}, {{128}, {2, 2, 2}}, {{256, 256}, {2, 2, 2}}, {{512, 512}, {2, 2, 2}},
              {{512, 512}, {2, 2, 2}}};
  s.fc = {4096, 4096};
  s.classes = classes;
  return s;
}

C3dSpec C3dSpec::desk(int classes, Index channels, Index frames, Index height, Index width) {
  C3dSpec s;
  s.channels = channels;
  s.frames = frames;
  s.height = height;
  s.width = width;
  s.groups = {{{8}, {1, 2, 2}}, {{16}, {2, 2, 2}}};
  s.fc = {64, 64};
  s.classes = classes;
  return s;
}

std::vector<C3dSpec::LayerShape> C3dSpec::shape_chain() const {
  auto fail = [](const std::string& layer, const std::string& why) {
    throw InputError("C3D spec: layer " + layer + " " + why);
  };
  if (channels < 1 || frames < 1 || height < 1 || width < 1) fail("input", "has a non-positive extent");
  if (groups.empty()) fail("conv1a", "is missing (no conv groups)");
  if (fc.empty()) fail("fc6", "is missing (no fully-connected layers)");
  if (classes < 1) fail(fc_name(fc.size()), "needs at least one class");

  std::vector<LayerShape> chain;
  Index c = channels;
  Extent3 ext{frames, height, width};
  const Extent3 pad = same_padding(kernel);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].filters.empty()) fail(conv_name(g, 0), "is missing (empty group)");
    for (std::size_t j = 0; j < groups[g].filters.size(); ++j) {
      const Index f = groups[g].filters[j];
      if (f < 1) fail(conv_name(g, j), "has no filters");
      const Extent3 out{ext.t + 2 * pad.t - kernel.t + 1, ext.h + 2 * pad.h - kernel.h + 1,
                        ext.w + 2 * pad.w - kernel.w + 1};
      if (out.t < 1 || out.h < 1 || out.w < 1) fail(conv_name(g, j), "receives an input smaller than its kernel");
      chain.push_back({conv_name(g, j), {f, out.t, out.h, out.w}, f * c * kernel.volume() + f});
      c = f;
      ext = out;
    }
    const Extent3 w = groups[g].pool;
    if (w.t < 1 || w.h < 1 || w.w < 1) fail("pool" + std::to_string(g + 1), "has a non-positive window");
    ext = Pool3dSpec{w}.output_extent(ext);
    chain.push_back({"pool" + std::to_string(g + 1), {c, ext.t, ext.h, ext.w}, 0});
  }
  Index in = c * ext.volume();
  for (std::size_t j = 0; j < fc.size(); ++j) {
    if (fc[j] < 1) fail(fc_name(j), "has no units");
    chain.push_back({fc_name(j), {fc[j]}, fc[j] * in + fc[j]});
    in = fc[j];
  }
  chain.push_back({fc_name(fc.size()), {Index(classes)}, Index(classes) * in + classes});
  return chain;
}

Index C3dSpec::parameter_count() const {
  Index total = 0;
  for (const auto& layer : shape_chain()) total += layer.parameters;
  return total;
}

// ---------------------------------------------------------------------------

C3dModel::C3dModel(const C3dSpec& spec) : spec_(spec) {
  const auto chain = spec_.shape_chain();
  const Extent3 pad = same_padding(spec_.kernel);
  Index c = spec_.channels;
  for (const auto& g : spec_.groups) {
    for (Index f : g.filters) {
      conv_.push_back(Conv3dParams::zeros(f, c, spec_.kernel, pad));
      c = f;
    }
    pool_after_.push_back(conv_.size() - 1);
    pools_.push_back({g.pool});
  }
  Index in = 0;
  for (const auto& layer : chain) {
    if (layer.name.rfind("pool", 0) == 0) in = shape_size(layer.shape);
  }
  for (std::size_t j = 0; j <= spec_.fc.size(); ++j) {
    const bool output = j == spec_.fc.size();
    const Index out = output ? Index(spec_.classes) : spec_.fc[j];
    fc_.push_back(DenseParams::zeros(in, out, output ? DenseActivation::None : DenseActivation::Relu));
    in = out;
  }
  conv_grad_ = conv_;
  fc_grad_ = fc_;
}

C3dModel C3dModel::zeros(const C3dSpec& spec) { return C3dModel(spec); }

C3dModel::C3dModel(const C3dSpec& spec, Rng& rng) : C3dModel(spec) {
  for (auto& conv : conv_) conv = Conv3dParams::glorot(conv.filters(), conv.channels(), conv.kernel(), conv.padding, rng);
  for (auto& fc : fc_) fc = DenseParams::glorot(fc.inputs(), fc.outputs(), rng, fc.activation);
}

C3dModel::Output C3dModel::forward(const Tensor& clips) const {
  if (clips.ndim() != 5 || clips.dim(1) != spec_.channels || clips.dim(2) != spec_.frames ||
      clips.dim(3) != spec_.height || clips.dim(4) != spec_.width) {
    throw DimensionError("C3D: clips " + shape_string(clips.shape()) + " do not match input " +
                         shape_string({spec_.channels, spec_.frames, spec_.height, spec_.width}));
  }
  Output out;
  Tensor x = clips;
  std::size_t next_pool = 0;
  for (std::size_t i = 0; i < conv_.size(); ++i) {
    auto conv = conv3d_forward(conv_[i], x);
    relu_inplace(conv.y);
    out.cache.conv.push_back(std::move(conv.cache));
    out.cache.conv_out.push_back(conv.y);
    x = std::move(conv.y);
    if (next_pool < pool_after_.size() && pool_after_[next_pool] == i) {
      auto pooled = maxpool3d(pools_[next_pool], x);
      out.cache.pool.push_back(std::move(pooled.cache));
      x = std::move(pooled.y);
      ++next_pool;
    }
  }
  out.cache.flat_shape = x.shape();
  Mat h = x.matrix();
  for (std::size_t j = 0; j < fc_.size(); ++j) {
    auto dense = dense_forward(fc_[j], h);
    out.cache.fc.push_back(std::move(dense.cache));
    h = std::move(dense.y);
    if (j == 0) out.fc6 = h;
  }
  out.logits = std::move(h);
  return out;
}

void C3dModel::backward(const Cache& cache, const MatRef& grad_logits) {
  Mat g = grad_logits;
  for (std::size_t j = fc_.size(); j-- > 0;) {
    auto grads = dense_backward(fc_[j], cache.fc[j], g);
    fc_grad_[j].W = std::move(grads.W);
    fc_grad_[j].b = std::move(grads.b);
    g = std::move(grads.dx);
  }
  Tensor grad(cache.flat_shape);
  grad.matrix() = g;
  std::size_t next_pool = pools_.size();
  for (std::size_t i = conv_.size(); i-- > 0;) {
    if (next_pool > 0 && pool_after_[next_pool - 1] == i) {
      --next_pool;
      grad = maxpool3d_backward(cache.pool[next_pool], grad);
    }
    grad.vector() = (cache.conv_out[i].vector().array() > 0).select(grad.vector(), Real(0));
    auto grads = conv3d_backward(conv_[i], cache.conv[i], grad);
    conv_grad_[i].kernels = std::move(grads.kernels);
    conv_grad_[i].bias = std::move(grads.bias);
    if (i > 0) grad = std::move(grads.input);
  }
}

std::vector<ParamRef> C3dModel::params() {
  std::vector<ParamRef> out;
  std::size_t i = 0;
  for (std::size_t g = 0; g < spec_.groups.size(); ++g) {
    for (std::size_t j = 0; j < spec_.groups[g].filters.size(); ++j, ++i) {
      out.push_back({conv_name(g, j) + ".kernels", &conv_[i].kernels, &conv_grad_[i].kernels});
      out.push_back({conv_name(g, j) + ".bias", &conv_[i].bias, &conv_grad_[i].bias});
    }
  }
  for (std::size_t j = 0; j < fc_.size(); ++j) {
    out.push_back({fc_name(j) + ".W", &fc_[j].W, &fc_grad_[j].W});
    out.push_back({fc_name(j) + ".b", &fc_[j].b, &fc_grad_[j].b});
  }
  return out;
}

void C3dModel::save(Checkpoint& ckpt) const {
  ckpt.meta["kind"] = "c3d";
  ckpt.meta["c3d.input"] = join({spec_.channels, spec_.frames, spec_.height, spec_.width});
  ckpt.meta["c3d.groups"] = encode_groups(spec_.groups);
  ckpt.meta["c3d.fc"] = join(spec_.fc);
  ckpt.meta["c3d.classes"] = std::to_string(spec_.classes);
  ckpt.meta["c3d.kernel"] = join({spec_.kernel.t, spec_.kernel.h, spec_.kernel.w});
  for (const auto& p : const_cast<C3dModel*>(this)->params()) ckpt.add(p.name, *p.value);
}

C3dModel C3dModel::load(const Checkpoint& ckpt) {
  if (ckpt.meta_at("kind") != "c3d") throw FormatError("checkpoint does not hold a C3D model");
  C3dSpec spec;
  const auto input = split_indices(ckpt.meta_at("c3d.input"));
  const auto kernel = split_indices(ckpt.meta_at("c3d.kernel"));
  if (input.size() != 4 || kernel.size() != 3) throw FormatError("C3D checkpoint: bad input/kernel meta");
  spec.channels = input[0];
  spec.frames = input[1];
  spec.height = input[2];
  spec.width = input[3];
  spec.kernel = {kernel[0], kernel[1], kernel[2]};
  spec.groups = decode_groups(ckpt.meta_at("c3d.groups"));
  spec.fc = split_indices(ckpt.meta_at("c3d.fc"));
  spec.classes = std::stoi(ckpt.meta_at("c3d.classes"));
  C3dModel model(spec);
  for (const auto& p : model.params()) {
    const Tensor& t = ckpt.at(p.name);
    if (t.shape() != p.value->shape()) throw FormatError("C3D checkpoint: tensor '" + p.name + "' has wrong shape");
    *p.value = t;
  }
  return model;
}

// ---------------------------------------------------------------------------

std::vector<Tensor> clip_split(const Tensor& video, Index clip_len) {
  if (video.ndim() != 4) throw DimensionError("clip_split expects [C x T x H x W], got " + shape_string(video.shape()));
  if (clip_len < 1) throw InputError("clip_split: clip length must be positive");
  const Index C = video.dim(0), T = video.dim(1), H = video.dim(2), W = video.dim(3);
  if (T == 0) throw InputError("clip_split: empty video");
  const Index full = T / clip_len, rest = T % clip_len;
  const bool pad_tail = rest > 0 && (full == 0 || 2 * rest >= clip_len);
  const Index count = full + (pad_tail ? 1 : 0);
  const Index frame = H * W;
  std::vector<Tensor> clips;
  for (Index k = 0; k < count; ++k) {
    Tensor clip({C, clip_len, H, W});
    for (Index c = 0; c < C; ++c) {
      for (Index t = 0; t < clip_len; ++t) {
        const Index src_t = std::min(k * clip_len + t, T - 1);
        std::copy_n(video.data() + (c * T + src_t) * frame, frame, clip.data() + (c * clip_len + t) * frame);
      }
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

Prediction clip_average(const MatRef& clip_probs) {
  if (clip_probs.rows() == 0) throw InputError("clip_average: no clips");
  return Prediction::from_probs(clip_probs.colwise().mean().transpose());
}

Vec clip_average_features(const MatRef& clip_features) {
  if (clip_features.rows() == 0) throw InputError("clip_average: no clips");
  return clip_features.colwise().mean().transpose();
}

namespace {

Tensor crop_at(const Tensor& video, Index top, Index left, Index height, Index width) {
  const Index C = video.dim(0), T = video.dim(1), H = video.dim(2), W = video.dim(3);
  Tensor out({C, T, height, width});
  for (Index c = 0; c < C; ++c) {
    for (Index t = 0; t < T; ++t) {
      for (Index y = 0; y < height; ++y) {
        std::copy_n(video.data() + ((c * T + t) * H + top + y) * W + left, width,
                    out.data() + ((c * T + t) * height + y) * width);
      }
    }
  }
  return out;
}

void check_crop(const Tensor& video, Index height, Index width) {
  if (video.ndim() != 4) throw DimensionError("crop expects [C x T x H x W], got " + shape_string(video.shape()));
  if (height < 1 || width < 1 || height > video.dim(2) || width > video.dim(3)) {
    throw DimensionError("crop " + std::to_string(height) + "x" + std::to_string(width) + " does not fit frame " +
                         std::to_string(video.dim(2)) + "x" + std::to_string(video.dim(3)));
  }
}

}  // namespace

Tensor center_crop(const Tensor& video, Index height, Index width) {
  check_crop(video, height, width);
  return crop_at(video, (video.dim(2) - height) / 2, (video.dim(3) - width) / 2, height, width);
}

Tensor random_crop(const Tensor& video, Index height, Index width, Rng& rng) {
  check_crop(video, height, width);
  const Index top = Index(rng.below(std::uint64_t(video.dim(2) - height + 1)));
  const Index left = Index(rng.below(std::uint64_t(video.dim(3) - width + 1)));
  return crop_at(video, top, left, height, width);
}

}  // namespace twostream
