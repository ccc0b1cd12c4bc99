#include "twostream/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>

namespace twostream {
namespace {

using Vec3 = std::array<double, 3>;

// (opening stroke, closing stroke) direction indices.
constexpr std::array<std::pair<int, int>, 9> kSkeletonCatalog{
    {{0, 0}, {0, 1}, {1, 0}, {1, 1}, {2, 2}, {0, 2}, {2, 0}, {1, 2}, {2, 1}}};
constexpr std::array<Vec3, 3> kDirections{{{0, 1, 0}, {0, 0, 1}, {1, 0, 0}}};

// (orientation step of 45 degrees, drift sign)
constexpr std::array<std::pair<int, int>, 8> kVideoCatalog{
    {{0, 1}, {0, -1}, {1, 1}, {1, -1}, {2, 1}, {2, -1}, {3, 1}, {3, -1}}};

int find_root(std::vector<int>& parent, int x) {
  while (parent[std::size_t(x)] != x) x = parent[std::size_t(x)] = parent[std::size_t(parent[std::size_t(x)])];
  return x;
}

// Smooth out-and-back bump on [lo, hi], zero elsewhere.
double bump(double s, double lo, double hi) {
  if (s <= lo || s >= hi) return 0.0;
  const double u = std::sin(std::numbers::pi * (s - lo) / (hi - lo));
  return u * u;
}

Vec3 rotate_y(const Vec3& v, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  return {c * v[0] + s * v[2], v[1], -s * v[0] + c * v[2]};
}

struct SubjectStyle {
  double scale;
  double tempo;  // shifts stroke timing
};

SubjectStyle subject_style(int subject) {
  Rng r(0x5EED0000ULL + std::uint64_t(subject));
  return {r.uniform(0.85, 1.15), r.uniform(-0.04, 0.04)};
}

double view_angle(int view, int views) {
  if (views <= 1) return 0.0;
  return (double(view) / double(views - 1) - 0.5) * (std::numbers::pi / 3.0);
}

Tensor make_skeleton(const SynthConfig& cfg, int signature, int subject, int view, Index length, Rng& rng) {
  const auto [open_dir, close_dir] = kSkeletonCatalog[std::size_t(signature)];
  const SubjectStyle style = subject_style(subject);
  const double angle = view_angle(view, cfg.views);
  const Index J = Index(cfg.persons) * cfg.joints;
  Tensor coords({length, J, 3});

  const double oj = cfg.origin_jitter;
  const Vec3 origin{rng.uniform(-oj, oj), rng.uniform(-0.4 * oj, 0.4 * oj), rng.uniform(-oj, oj)};
  const double amp_open = cfg.stroke_amplitude * rng.uniform(0.8, 1.2);
  const double amp_close = cfg.stroke_amplitude * rng.uniform(0.8, 1.2);
  const double jitter = rng.uniform(-0.03, 0.03) + style.tempo;
  // class-independent stroke through the middle of the sequence
  Vec3 distractor{rng.normal(), rng.normal(), rng.normal()};
  const double dn = std::sqrt(distractor[0] * distractor[0] + distractor[1] * distractor[1] +
                              distractor[2] * distractor[2]);
  const double amp_mid = cfg.distractor_amplitude * rng.uniform(0.5, 1.5) / std::max(dn, 1e-9);

  for (Index t = 0; t < length; ++t) {
    const double s = length > 1 ? double(t) / double(length - 1) : 0.0;
    const double open = amp_open * bump(s, 0.0, 0.35 + jitter);
    const double close = amp_close * bump(s, 0.65 + jitter, 1.0);
    const double mid = amp_mid * bump(s, 0.25 + jitter, 0.75 + jitter);
    for (Index j = 0; j < J; ++j) {
      const int person = int(j / cfg.joints);
      const int joint = int(j % cfg.joints);
      // rest pose: a vertical chain per person, persons side by side
      Vec3 p{1.0 * person, 0.3 * joint * style.scale, 0.0};
      // limb weight grows toward the chain's end
      const double limb = double(joint) / double(std::max(cfg.joints - 1, 1));
      for (int a = 0; a < 3; ++a) {
        p[std::size_t(a)] += limb * style.scale *
                             (open * kDirections[std::size_t(open_dir)][std::size_t(a)] +
                              close * kDirections[std::size_t(close_dir)][std::size_t(a)] +
                              mid * distractor[std::size_t(a)]);
      }
      p = rotate_y(p, angle);
      for (int a = 0; a < 3; ++a) {
        coords(t, j, a) = Real(p[std::size_t(a)] + origin[std::size_t(a)] + cfg.skeleton_noise * rng.normal());
      }
    }
  }
  return coords;
}

Tensor make_video(const SynthConfig& cfg, int signature, int view, Rng& rng) {
  const auto [orient, drift] = kVideoCatalog[std::size_t(signature)];
  const double theta = orient * std::numbers::pi / 4.0;
  const double freq = 2.0 * std::numbers::pi * 3.0 / double(cfg.video_width);
  const double speed = drift * std::numbers::pi / 4.0 * rng.uniform(0.8, 1.2);
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double contrast = cfg.video_contrast * rng.uniform(0.7, 1.3);
  const double brightness = 0.5 + 0.05 * (view - (cfg.views - 1) / 2.0);
  Tensor pixels({cfg.video_channels, cfg.video_frames, cfg.video_height, cfg.video_width});
  for (Index c = 0; c < cfg.video_channels; ++c) {
    const double tint = rng.uniform(0.8, 1.2);
    for (Index t = 0; t < cfg.video_frames; ++t) {
      for (Index y = 0; y < cfg.video_height; ++y) {
        for (Index x = 0; x < cfg.video_width; ++x) {
          const double u = std::cos(theta) * double(x) + std::sin(theta) * double(y);
          const double v = brightness + 0.5 * contrast * tint * std::sin(freq * u - speed * double(t) + phase) +
                           cfg.video_noise * rng.normal();
          pixels(c, t, y, x) = Real(std::clamp(v, 0.0, 1.0));
        }
      }
    }
  }
  return pixels;
}

}  // namespace

void SynthConfig::validate() const {
  if (classes < 2) throw InputError("synth: need at least 2 classes");
  if (samples_per_class < 1) throw InputError("synth: samples_per_class must be positive");
  if (t_min < 1 || t_max < t_min) throw InputError("synth: need 1 <= t_min <= t_max");
  if (persons < 1 || joints < 2) throw InputError("synth: need at least 1 person with 2 joints");
  if (subjects < 2 || views < 1) throw InputError("synth: need at least 2 subjects and 1 view");
  if (video_channels < 1 || video_frames < 1 || video_height < 1 || video_width < 1) {
    throw InputError("synth: video extents must be positive");
  }
  for (const auto& shared : {skeleton_shared, video_shared}) {
    for (auto [a, b] : shared) {
      if (a < 0 || b < 0 || a >= classes || b >= classes || a == b) {
        throw InputError("synth: shared pair (" + std::to_string(a) + "," + std::to_string(b) + ") is invalid");
      }
    }
  }
  const auto sk = signature_ids(classes, skeleton_shared);
  const auto vid = signature_ids(classes, video_shared);
  if (*std::max_element(sk.begin(), sk.end()) >= int(kSkeletonCatalog.size())) {
    throw InputError("synth: too many distinct skeleton signatures");
  }
  if (*std::max_element(vid.begin(), vid.end()) >= int(kVideoCatalog.size())) {
    throw InputError("synth: too many distinct video signatures");
  }
}

std::vector<int> signature_ids(int classes, const std::vector<std::pair<int, int>>& shared) {
  std::vector<int> parent(static_cast<std::size_t>(classes));
  std::iota(parent.begin(), parent.end(), 0);
  for (auto [a, b] : shared) {
    if (a < 0 || a >= classes || b < 0 || b >= classes) {
      throw InputError("synth: shared pair " + std::to_string(a) + "-" + std::to_string(b) + " names a class outside 0.." +
                       std::to_string(classes - 1));
    }
    const int ra = find_root(parent, a), rb = find_root(parent, b);
    parent[std::size_t(std::max(ra, rb))] = std::min(ra, rb);
  }
  std::vector<int> ids(std::size_t(classes), -1), root_id(std::size_t(classes), -1);
  int next = 0;
  for (int k = 0; k < classes; ++k) {
    const int r = find_root(parent, k);
    if (root_id[std::size_t(r)] < 0) root_id[std::size_t(r)] = next++;
    ids[std::size_t(k)] = root_id[std::size_t(r)];
  }
  return ids;
}

Dataset generate_synthetic(const SynthConfig& cfg, Rng& rng) {
  cfg.validate();
  const auto sk_sig = signature_ids(cfg.classes, cfg.skeleton_shared);
  const auto vid_sig = signature_ids(cfg.classes, cfg.video_shared);
  Dataset data;
  data.num_classes = cfg.classes;
  int id = 0;
  for (int k = 0; k < cfg.classes; ++k) {
    for (int i = 0; i < cfg.samples_per_class; ++i, ++id) {
      Sample s;
      s.id = id;
      const int subject = i % cfg.subjects;
      const int view = (i + i / cfg.subjects) % cfg.views;
      const Index length = cfg.t_min + Index(rng.below(std::uint64_t(cfg.t_max - cfg.t_min + 1)));
      s.skeleton = {make_skeleton(cfg, sk_sig[std::size_t(k)], subject, view, length, rng), k, subject, view};
      s.video = {make_video(cfg, vid_sig[std::size_t(k)], view, rng), k, subject, view};
      data.samples.push_back(std::move(s));
    }
  }
  return data;
}

}  // namespace twostream
