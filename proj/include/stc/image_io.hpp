#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "stc/data.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Loads a directory of PNG/PGM frames (lexicographic order), resized with
// bilinear interpolation to target_size×target_size and scaled to [0,1].
// channels: 1 (grayscale) or 3.
template <typename T>
VideoSequence<T> load_frame_dir(const std::string& path, int target_size, int channels = 1) {
  namespace fs = std::filesystem;
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("load_frame_dir: channels must be 1 or 3");
  }
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (!e.is_regular_file()) continue;
    const std::string ext = e.path().extension().string();
    if (ext == ".png" || ext == ".pgm" || ext == ".jpg" || ext == ".jpeg") {
      files.push_back(e.path().string());
    }
  }
  if (files.empty()) throw std::invalid_argument("load_frame_dir: no frames in " + path);
  std::sort(files.begin(), files.end());

  VideoSequence<T> video;
  video.source = fs::path(path).filename().string();
  for (const auto& file : files) {
    cv::Mat img = cv::imread(file, channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (img.empty()) throw std::runtime_error("load_frame_dir: unreadable image " + file);
    cv::Mat resized;
    cv::resize(img, resized, cv::Size(target_size, target_size), 0, 0, cv::INTER_LINEAR);
    Tensor<T> frame({channels, target_size, target_size});
    for (int h = 0; h < target_size; ++h) {
      for (int w = 0; w < target_size; ++w) {
        if (channels == 1) {
          frame[h * target_size + w] = static_cast<T>(resized.at<unsigned char>(h, w)) / T(255);
        } else {
          const auto& px = resized.at<cv::Vec3b>(h, w);
          for (int c = 0; c < 3; ++c) {
            frame[(c * target_size + h) * target_size + w] = static_cast<T>(px[c]) / T(255);
          }
        }
      }
    }
    video.frames.push_back(std::move(frame));
  }
  video.validate();
  return video;
}

// One line per frame, 0 or 1.
inline std::vector<int> load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_labels: cannot open " + path);
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line != "0" && line != "1") {
      throw std::runtime_error("load_labels: bad line '" + line + "' in " + path);
    }
    labels.push_back(line == "1" ? 1 : 0);
  }
  return labels;
}

// Writes a single-channel [1,H,W] (or first channel) tensor as binary PGM,
// values clamped to [0,1] and scaled to 0..255.
template <typename T>
void write_pgm(const std::string& path, const Tensor<T>& frame) {
  const int H = frame.dim(frame.ndim() - 2), W = frame.dim(frame.ndim() - 1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_pgm: cannot open " + path);
  out << "P5\n" << W << " " << H << "\n255\n";
  for (int i = 0; i < H * W; ++i) {
    const double v = std::clamp(static_cast<double>(frame[i]), 0.0, 1.0);
    out.put(static_cast<char>(static_cast<int>(v * 255.0 + 0.5)));
  }
}

// Dumps a video as zero-padded PGM frames plus an optional label file.
template <typename T>
void write_video_dir(const std::string& dir, const VideoSequence<T>& video,
                     bool with_labels = false) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  char name[32];
  for (int t = 0; t < video.length(); ++t) {
    std::snprintf(name, sizeof(name), "frame_%05d.pgm", t);
    write_pgm(dir + "/" + name, video.frames[static_cast<std::size_t>(t)]);
  }
  if (with_labels) {
    std::ofstream out(dir + "_labels.txt");
    for (int l : video.labels) out << l << "\n";
  }
}

}  // namespace stc
