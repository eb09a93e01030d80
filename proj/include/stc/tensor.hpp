#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stc {

// Dense row-major tensor. Shapes follow [batch, channels, height, width]
// with a leading time axis where the caller needs one.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<int> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), T{}) {}

  Tensor(std::vector<int> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<std::size_t>(checked_numel(shape_)) != data_.size()) {
      throw std::invalid_argument("tensor: data size " + std::to_string(data_.size()) +
                                  " does not match shape " + shape_str());
    }
  }

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

  static Tensor full(std::vector<int> shape, T value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  static Tensor scalar(T value) { return Tensor({1}, {value}); }

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_.at(static_cast<std::size_t>(i)); }
  int ndim() const { return static_cast<int>(shape_.size()); }

  int numel() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](int i) const { return data_[static_cast<std::size_t>(i)]; }

  // 4-d accessor for [B,C,H,W] tensors.
  T& at(int b, int c, int h, int w) {
    return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }
  const T& at(int b, int c, int h, int w) const {
    return data_[static_cast<std::size_t>(((b * shape_[1] + c) * shape_[2] + h) * shape_[3] + w)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

  std::string shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      if (i) os << ',';
      os << shape_[i];
    }
    os << ']';
    return os.str();
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  Tensor reshaped(std::vector<int> shape) const {
    if (checked_numel(shape) != numel()) {
      throw std::invalid_argument("reshape: element count mismatch " + shape_str());
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.size());
    std::transform(data_.begin(), data_.end(), out.begin(),
                   [](T v) { return static_cast<U>(v); });
    return Tensor<U>(shape_, std::move(out));
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  void add_inplace(const Tensor& other) {
    require_same_shape(other, "add");
    for (int i = 0; i < numel(); ++i) data_[static_cast<std::size_t>(i)] += other[i];
  }

  T sum() const { return std::accumulate(data_.begin(), data_.end(), T{}); }

  T max_value() const {
    if (data_.empty()) throw std::invalid_argument("max_value: empty tensor");
    return *std::max_element(data_.begin(), data_.end());
  }

  void require_same_shape(const Tensor& other, const char* op) const {
    if (!same_shape(other)) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str() +
                                  " vs " + other.shape_str());
    }
  }

  static int checked_numel(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
      if (d <= 0) throw std::invalid_argument("tensor: non-positive dimension");
      n *= d;
    }
    if (n > (1LL << 31)) throw std::invalid_argument("tensor: too large");
    return static_cast<int>(n);
  }

 private:
  std::vector<int> shape_;
  std::vector<T> data_;
};

template <typename T>
Tensor<T> random_uniform(std::vector<int> shape, T lo, T hi, std::mt19937& rng) {
  Tensor<T> t(std::move(shape));
  std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
  for (int i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(dist(rng));
  return t;
}

}  // namespace stc
