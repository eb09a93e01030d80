#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/generator.hpp"
#include "stc/graph.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Ordered frames [C,H,W] in [0,1] with optional per-frame labels
// (0 normal, 1 abnormal).
template <typename T>
struct VideoSequence {
  std::string source;
  std::vector<Tensor<T>> frames;
  std::vector<int> labels;  // empty or one per frame

  int length() const { return static_cast<int>(frames.size()); }

  void validate() const {
    if (frames.empty()) throw std::invalid_argument("video " + source + ": no frames");
    for (const auto& f : frames) {
      if (!f.same_shape(frames[0])) {
        throw std::invalid_argument("video " + source + ": mixed frame shapes");
      }
    }
    if (!labels.empty() && labels.size() != frames.size()) {
      throw std::invalid_argument("video " + source + ": label count mismatch");
    }
  }
};

struct WindowSpec {
  int context = 8;  // i
  int horizon = 5;  // p
  int stride = 1;

  int min_video_length() const { return 2 * context + horizon; }
};

// Start indices t of P for every eligible window: t = i, i+1, ..., T-p-i.
inline std::vector<int> iter_windows(int video_length, const WindowSpec& spec) {
  if (spec.context < 1 || spec.horizon < 1 || spec.stride < 1) {
    throw std::invalid_argument("window spec: i, p, stride must be >= 1");
  }
  std::vector<int> starts;
  for (int t = spec.context; t + spec.horizon + spec.context <= video_length; t += spec.stride) {
    starts.push_back(t);
  }
  return starts;
}

// Stacks per-video [C,H,W] frames into batched [B,C,H,W] window tensors.
// Each entry of `picks` is (video index, P start index).
template <typename T>
WindowBatch<T> make_window_batch(const std::vector<VideoSequence<T>>& videos,
                                 const std::vector<std::pair<int, int>>& picks,
                                 const WindowSpec& spec) {
  if (picks.empty()) throw std::invalid_argument("make_window_batch: empty batch");
  const int B = static_cast<int>(picks.size());
  const Tensor<T>& probe = videos.at(static_cast<std::size_t>(picks[0].first)).frames.at(0);
  const int C = probe.dim(0), H = probe.dim(1), W = probe.dim(2);
  auto stack = [&](int offset) {
    Tensor<T> out({B, C, H, W});
    for (int b = 0; b < B; ++b) {
      const auto& [vi, t] = picks[static_cast<std::size_t>(b)];
      const Tensor<T>& f = videos.at(static_cast<std::size_t>(vi))
                               .frames.at(static_cast<std::size_t>(t + offset));
      std::copy(f.data(), f.data() + f.numel(), out.data() + b * C * H * W);
    }
    return out;
  };
  WindowBatch<T> w;
  for (int s = -spec.context; s < 0; ++s) w.before.push_back(stack(s));
  for (int s = 0; s < spec.horizon; ++s) w.targets.push_back(stack(s));
  for (int s = spec.horizon; s < spec.horizon + spec.context; ++s) w.after.push_back(stack(s));
  return w;
}

// ---- synthetic benchmark ----

enum class AnomalyKind { none, speed, shape, teleport };

inline AnomalyKind anomaly_kind_from_string(const std::string& s) {
  if (s == "none") return AnomalyKind::none;
  if (s == "speed") return AnomalyKind::speed;
  if (s == "shape") return AnomalyKind::shape;
  if (s == "teleport") return AnomalyKind::teleport;
  throw std::invalid_argument("unknown anomaly kind: " + s);
}

struct SyntheticSceneConfig {
  int canvas = 32;
  int num_frames = 64;
  int num_objects = 2;
  double min_speed = 0.5;
  double max_speed = 1.0;
  AnomalyKind anomaly = AnomalyKind::none;
  double speed_factor = 3.0;
  int anomaly_start = -1;  // [start, end)
  int anomaly_end = -1;
  unsigned seed = 0;

  void validate() const {
    if (canvas < 8 || num_frames < 1 || num_objects < 1) {
      throw std::invalid_argument("synthetic config: bad dimensions");
    }
    if (anomaly != AnomalyKind::none) {
      if (anomaly_start < 0 || anomaly_end <= anomaly_start || anomaly_end > num_frames) {
        throw std::invalid_argument("synthetic config: anomaly interval outside video bounds");
      }
    }
  }
};

namespace detail {

struct SynthObject {
  int kind = 0;  // 0 square, 1 circle, 2 cross (cross only appears as shape anomaly)
  double x = 0, y = 0, vx = 0, vy = 0;
  double radius = 3.0;
  double intensity = 1.0;
};

template <typename T>
void draw_object(Tensor<T>& frame, const SynthObject& o) {
  const int H = frame.dim(1), W = frame.dim(2);
  const int r = static_cast<int>(std::ceil(o.radius)) + 1;
  const int cx = static_cast<int>(std::lround(o.x));
  const int cy = static_cast<int>(std::lround(o.y));
  for (int h = std::max(0, cy - r); h <= std::min(H - 1, cy + r); ++h) {
    for (int w = std::max(0, cx - r); w <= std::min(W - 1, cx + r); ++w) {
      const double dx = w - o.x, dy = h - o.y;
      bool inside = false;
      switch (o.kind) {
        case 0: inside = std::abs(dx) <= o.radius && std::abs(dy) <= o.radius; break;
        case 1: inside = dx * dx + dy * dy <= o.radius * o.radius; break;
        default:
          inside = (std::abs(dx) <= o.radius && std::abs(dy) <= 1.0) ||
                   (std::abs(dy) <= o.radius && std::abs(dx) <= 1.0);
      }
      if (!inside) continue;
      T& px = frame[(0 * H + h) * W + w];
      px = std::max(px, static_cast<T>(o.intensity));
    }
  }
}

inline void bounce(SynthObject& o, double lo, double hi) {
  if (o.x < lo) { o.x = lo + (lo - o.x); o.vx = -o.vx; }
  if (o.x > hi) { o.x = hi - (o.x - hi); o.vx = -o.vx; }
  if (o.y < lo) { o.y = lo + (lo - o.y); o.vy = -o.vy; }
  if (o.y > hi) { o.y = hi - (o.y - hi); o.vy = -o.vy; }
}

}  // namespace detail

// Procedurally generated scene: objects with constant velocities bouncing
// at the borders; during the anomaly interval the configured deviation
// applies and labels are 1. Pure function of its config.
template <typename T>
VideoSequence<T> synth_generate(const SyntheticSceneConfig& cfg) {
  cfg.validate();
  std::mt19937 rng(cfg.seed);
  std::uniform_real_distribution<double> upos(4.0, cfg.canvas - 5.0);
  std::uniform_real_distribution<double> uspeed(cfg.min_speed, cfg.max_speed);
  std::uniform_real_distribution<double> uangle(0.0, 2.0 * 3.14159265358979323846);
  std::uniform_real_distribution<double> urad(2.0, 3.5);
  std::uniform_real_distribution<double> ushade(0.55, 1.0);

  std::vector<detail::SynthObject> objects;
  for (int k = 0; k < cfg.num_objects; ++k) {
    detail::SynthObject o;
    o.kind = k % 2;  // squares and circles are the normal vocabulary
    o.x = upos(rng);
    o.y = upos(rng);
    const double s = uspeed(rng), a = uangle(rng);
    o.vx = s * std::cos(a);
    o.vy = s * std::sin(a);
    o.radius = urad(rng);
    o.intensity = ushade(rng);
    objects.push_back(o);
  }
  detail::SynthObject intruder;  // shape anomaly: a cross, absent from normal videos
  intruder.kind = 2;
  intruder.x = upos(rng);
  intruder.y = upos(rng);
  {
    const double s = uspeed(rng), a = uangle(rng);
    intruder.vx = s * std::cos(a);
    intruder.vy = s * std::sin(a);
  }
  intruder.radius = 4.5;
  intruder.intensity = 1.0;

  VideoSequence<T> video;
  video.source = "synthetic-seed" + std::to_string(cfg.seed);
  std::uniform_real_distribution<double> ujump(3.0, cfg.canvas - 4.0);
  for (int t = 0; t < cfg.num_frames; ++t) {
    const bool in_anomaly = cfg.anomaly != AnomalyKind::none && t >= cfg.anomaly_start &&
                            t < cfg.anomaly_end;
    Tensor<T> frame({1, cfg.canvas, cfg.canvas});
    for (auto& o : objects) {
      double step = 1.0;
      if (in_anomaly && cfg.anomaly == AnomalyKind::speed) step = cfg.speed_factor;
      if (in_anomaly && cfg.anomaly == AnomalyKind::teleport) {
        o.x = ujump(rng);
        o.y = ujump(rng);
      } else {
        o.x += o.vx * step;
        o.y += o.vy * step;
        detail::bounce(o, 2.0, cfg.canvas - 3.0);
      }
      detail::draw_object(frame, o);
    }
    if (cfg.anomaly == AnomalyKind::shape) {
      intruder.x += intruder.vx;
      intruder.y += intruder.vy;
      detail::bounce(intruder, 2.0, cfg.canvas - 3.0);
      if (in_anomaly) detail::draw_object(frame, intruder);
    }
    video.frames.push_back(std::move(frame));
    video.labels.push_back(in_anomaly ? 1 : 0);
  }
  video.validate();
  return video;
}

// The desk-scale benchmark: normal-motion training videos plus labeled test
// videos cycling through the anomaly kinds.
struct SyntheticSuiteConfig {
  int num_train = 8;
  int num_test = 4;
  int canvas = 32;
  int train_frames = 64;
  int test_frames = 96;
  int num_objects = 2;
  unsigned seed = 0;
};

template <typename T>
struct SyntheticSuite {
  std::vector<VideoSequence<T>> train;
  std::vector<VideoSequence<T>> test;
};

template <typename T>
SyntheticSuite<T> make_synthetic_suite(const SyntheticSuiteConfig& cfg) {
  SyntheticSuite<T> suite;
  const AnomalyKind kinds[3] = {AnomalyKind::speed, AnomalyKind::shape, AnomalyKind::teleport};
  for (int k = 0; k < cfg.num_train; ++k) {
    SyntheticSceneConfig sc;
    sc.canvas = cfg.canvas;
    sc.num_frames = cfg.train_frames;
    sc.num_objects = cfg.num_objects;
    sc.seed = cfg.seed * 1000u + static_cast<unsigned>(k);
    auto v = synth_generate<T>(sc);
    v.source = "train_" + std::to_string(k);
    suite.train.push_back(std::move(v));
  }
  for (int k = 0; k < cfg.num_test; ++k) {
    SyntheticSceneConfig sc;
    sc.canvas = cfg.canvas;
    sc.num_frames = cfg.test_frames;
    sc.num_objects = cfg.num_objects;
    sc.anomaly = kinds[k % 3];
    sc.anomaly_start = cfg.test_frames / 3;
    sc.anomaly_end = 2 * cfg.test_frames / 3;
    sc.seed = cfg.seed * 1000u + 500u + static_cast<unsigned>(k);
    auto v = synth_generate<T>(sc);
    v.source = "test_" + std::to_string(k);
    suite.test.push_back(std::move(v));
  }
  return suite;
}

}  // namespace stc
