#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "stc/data.hpp"
#include "stc/generator.hpp"
#include "stc/graph.hpp"
#include "stc/tensor.hpp"

namespace stc {

struct ScoreRecord {
  int frame_index = 0;
  double psnr = 0.0;
  double regular = 0.0;  // S(t) in [0,1]
  double anomaly = 0.0;  // 1 - S(t)
  int label = -1;        // -1 when unlabeled
};

struct ScoreSeries {
  std::string source;
  std::vector<ScoreRecord> records;
};

inline constexpr double kPsnrCap = 100.0;

// 10·log10(peak²/MSE) with peak = max(max x̂, 1e-3); capped at 100 dB for
// near-zero error.
template <typename T>
double psnr(const Tensor<T>& truth, const Tensor<T>& predicted) {
  truth.require_same_shape(predicted, "psnr");
  double mse = 0.0;
  for (int i = 0; i < truth.numel(); ++i) {
    const double d = static_cast<double>(truth[i]) - static_cast<double>(predicted[i]);
    mse += d * d;
  }
  mse /= truth.numel();
  if (mse < 1e-10) return kPsnrCap;
  const double peak = std::max(static_cast<double>(predicted.max_value()), 1e-3);
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / mse));
}

// Min-max over the same video; a constant (or singleton) series maps to 0.5.
inline std::vector<double> normalize_scores(const std::vector<double>& psnr_series) {
  if (psnr_series.empty()) throw std::invalid_argument("normalize_scores: empty series");
  const auto [mn, mx] = std::minmax_element(psnr_series.begin(), psnr_series.end());
  std::vector<double> out(psnr_series.size());
  if (*mx - *mn < 1e-12) {
    std::fill(out.begin(), out.end(), 0.5);
    return out;
  }
  for (std::size_t i = 0; i < psnr_series.size(); ++i) {
    out[i] = (psnr_series[i] - *mn) / (*mx - *mn);
  }
  return out;
}

struct ScoringConfig {
  GeneratorConfig generator;
  int offset = 2;  // d: frame t scored with the error of x̂_{t+d}
  bool bidirectional = true;
};

// Generates P̂ for the window whose targets start at t, teacher-forcing the
// context and never reading the true target frames, and returns the p
// predicted frames (frame space).
template <typename T>
std::vector<Tensor<T>> predict_window_inference(ParamStore<T>& store,
                                                const ScoringConfig& cfg,
                                                const WindowBatch<T>& w) {
  Graph<T> g(false);
  std::mt19937 rng(0);  // parameters already exist; bind never re-inits
  GeneratorNet<T> net(g, store, cfg.generator, rng);
  std::vector<bool> ctx(static_cast<std::size_t>(cfg.generator.context), true);
  PredictOutput<T> out = net.predict_window(w, ctx, cfg.bidirectional);
  std::vector<Tensor<T>> frames;
  for (Value v : out.frames) frames.push_back(g.val(v));
  return frames;
}

// Slides stride-1 windows over the video; the window with targets starting
// at t contributes PSNR(x_{t+d}, x̂_{t+d}) as the raw score of frame t.
// Scores are then min-max normalized per video; boundary frames take the
// nearest computed score.
template <typename T>
ScoreSeries accumulated_regular_score(const VideoSequence<T>& video, ParamStore<T>& store,
                                      const ScoringConfig& cfg) {
  video.validate();
  const int i = cfg.generator.context, p = cfg.generator.horizon;
  if (cfg.offset < 0 || cfg.offset >= p) {
    throw std::invalid_argument("accumulated_regular_score: offset must be in [0, p)");
  }
  const WindowSpec spec{i, p, 1};
  if (video.length() < spec.min_video_length()) {
    throw std::invalid_argument("accumulated_regular_score: video " + video.source + " has " +
                                std::to_string(video.length()) + " frames, needs at least " +
                                std::to_string(spec.min_video_length()));
  }
  std::vector<VideoSequence<T>> one{video};
  const std::vector<int> starts = iter_windows(video.length(), spec);
  std::vector<double> raw(starts.size());
  for (std::size_t k = 0; k < starts.size(); ++k) {
    const int t = starts[k];
    WindowBatch<T> w = make_window_batch(one, {{0, t}}, spec);
    std::vector<Tensor<T>> phat = predict_window_inference(store, cfg, w);
    const Tensor<T>& truth = w.targets[static_cast<std::size_t>(cfg.offset)];
    raw[k] = psnr(truth, phat[static_cast<std::size_t>(cfg.offset)]);
  }
  const std::vector<double> normalized = normalize_scores(raw);

  ScoreSeries series;
  series.source = video.source;
  const int first = starts.front(), last = starts.back();
  for (int t = 0; t < video.length(); ++t) {
    const int nearest = std::clamp(t, first, last) - first;
    ScoreRecord r;
    r.frame_index = t;
    r.psnr = raw[static_cast<std::size_t>(nearest)];
    r.regular = normalized[static_cast<std::size_t>(nearest)];
    r.anomaly = 1.0 - r.regular;
    r.label = video.labels.empty() ? -1 : video.labels[static_cast<std::size_t>(t)];
    series.records.push_back(r);
  }
  return series;
}

inline std::vector<double> anomaly_scores(const ScoreSeries& s) {
  std::vector<double> out;
  for (const auto& r : s.records) out.push_back(1.0 - r.regular);
  return out;
}

}  // namespace stc
