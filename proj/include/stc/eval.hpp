#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "stc/image_io.hpp"
#include "stc/scoring.hpp"

namespace stc {

// ROC AUC via the Mann–Whitney rank statistic; ties contribute ½.
inline double frame_level_auc(const std::vector<double>& anomaly_scores,
                              const std::vector<int>& labels) {
  if (anomaly_scores.size() != labels.size()) {
    throw std::invalid_argument("frame_level_auc: length mismatch");
  }
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg)++;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("frame_level_auc: labels contain a single class");
  }
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return anomaly_scores[a] < anomaly_scores[b];
  });
  // rank sum of positives with midranks for ties
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           anomaly_scores[order[j + 1]] == anomaly_scores[order[i]]) {
      ++j;
    }
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum += midrank;
    }
    i = j + 1;
  }
  const double n1 = static_cast<double>(n_pos), n0 = static_cast<double>(n_neg);
  return (rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0);
}

// Mean PSNR over normal frames minus mean PSNR over abnormal frames.
inline double delta_p(const std::vector<double>& psnr_series, const std::vector<int>& labels) {
  if (psnr_series.size() != labels.size()) throw std::invalid_argument("delta_p: length mismatch");
  double s0 = 0, s1 = 0;
  std::size_t n0 = 0, n1 = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i]) { s1 += psnr_series[i]; ++n1; } else { s0 += psnr_series[i]; ++n0; }
  }
  if (n0 == 0 || n1 == 0) throw std::invalid_argument("delta_p: labels contain a single class");
  return s0 / static_cast<double>(n0) - s1 / static_cast<double>(n1);
}

struct EvaluationReport {
  std::vector<std::pair<std::string, double>> per_video_auc;
  double overall_auc = 0.0;  // micro: per-video-normalized scores pooled
  double macro_auc = 0.0;    // mean of per-video AUCs (where defined)
  double delta_p = 0.0;
  std::size_t normal_frames = 0;
  std::size_t abnormal_frames = 0;
};

// Pools per-video-normalized scores: normalization happened per video in
// scoring, so concatenation here follows the protocol ordering.
inline EvaluationReport evaluate(const std::vector<ScoreSeries>& series) {
  EvaluationReport rep;
  std::vector<double> all_scores, all_psnr;
  std::vector<int> all_labels;
  std::vector<double> per_video;
  for (const auto& s : series) {
    std::vector<double> scores, psnrs;
    std::vector<int> labels;
    for (const auto& r : s.records) {
      if (r.label < 0) throw std::invalid_argument("evaluate: unlabeled frame in " + s.source);
      scores.push_back(r.anomaly);
      psnrs.push_back(r.psnr);
      labels.push_back(r.label);
      (r.label ? rep.abnormal_frames : rep.normal_frames)++;
    }
    all_scores.insert(all_scores.end(), scores.begin(), scores.end());
    all_psnr.insert(all_psnr.end(), psnrs.begin(), psnrs.end());
    all_labels.insert(all_labels.end(), labels.begin(), labels.end());
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    if (both) {
      const double auc = frame_level_auc(scores, labels);
      rep.per_video_auc.emplace_back(s.source, auc);
      per_video.push_back(auc);
    }
  }
  rep.overall_auc = frame_level_auc(all_scores, all_labels);
  rep.delta_p = delta_p(all_psnr, all_labels);
  rep.macro_auc = per_video.empty()
                      ? rep.overall_auc
                      : std::accumulate(per_video.begin(), per_video.end(), 0.0) /
                            static_cast<double>(per_video.size());
  return rep;
}

// ---- export ----

inline void write_score_csv(const std::string& path, const ScoreSeries& s) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_score_csv: cannot open " + path);
  out << "frame_index,psnr,regular_score,anomaly_score,label\n";
  out << std::setprecision(12);
  for (const auto& r : s.records) {
    out << r.frame_index << ',' << r.psnr << ',' << r.regular << ',' << r.anomaly << ','
        << r.label << "\n";
  }
}

inline ScoreSeries read_score_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_score_csv: cannot open " + path);
  ScoreSeries s;
  s.source = std::filesystem::path(path).stem().string();
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ScoreRecord r;
    std::istringstream is(line);
    char comma;
    is >> r.frame_index >> comma >> r.psnr >> comma >> r.regular >> comma >> r.anomaly >>
        comma >> r.label;
    if (!is) throw std::runtime_error("read_score_csv: bad row in " + path);
    s.records.push_back(r);
  }
  return s;
}

inline void write_report(const std::string& path, const EvaluationReport& rep) {
  nlohmann::json j;
  j["overall_auc"] = rep.overall_auc;
  j["macro_auc"] = rep.macro_auc;
  j["delta_p"] = rep.delta_p;
  j["normal_frames"] = rep.normal_frames;
  j["abnormal_frames"] = rep.abnormal_frames;
  for (const auto& [name, auc] : rep.per_video_auc) j["per_video_auc"][name] = auc;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_report: cannot open " + path);
  out << j.dump(2) << "\n";
}

// Score CSVs, the report summary, and per-frame squared-error maps for the
// window whose targets start at `map_start` of each video.
template <typename T>
void export_artifacts(const std::vector<ScoreSeries>& series, const EvaluationReport& rep,
                      const std::vector<VideoSequence<T>>& videos, ParamStore<T>& store,
                      const ScoringConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  for (const auto& s : series) {
    write_score_csv(out_dir + "/scores_" + s.source + ".csv", s);
  }
  write_report(out_dir + "/report.json", rep);
  const WindowSpec spec{cfg.generator.context, cfg.generator.horizon, 1};
  for (const auto& video : videos) {
    if (video.length() < spec.min_video_length()) continue;
    // error maps for the middle window (covers the anomaly interval of the
    // synthetic suite)
    const std::vector<int> starts = iter_windows(video.length(), spec);
    const int t = starts[starts.size() / 2];
    std::vector<VideoSequence<T>> one{video};
    WindowBatch<T> w = make_window_batch(one, {{0, t}}, spec);
    std::vector<Tensor<T>> phat = predict_window_inference(store, cfg, w);
    for (std::size_t k = 0; k < phat.size(); ++k) {
      const Tensor<T>& truth = w.targets[k];
      Tensor<T> err(truth.shape());
      for (int i = 0; i < err.numel(); ++i) {
        const T d = truth[i] - phat[k][i];
        err[i] = d * d;
      }
      char name[80];
      std::snprintf(name, sizeof(name), "/errmap_%s_t%03d_k%zu.pgm", video.source.c_str(), t, k);
      write_pgm(out_dir + name, err);
    }
  }
}

}  // namespace stc
