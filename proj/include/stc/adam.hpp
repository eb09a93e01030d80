#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/graph.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Adam with bias correction. Moment buffers are keyed by parameter name and
// created lazily; the step counter is shared across the parameter group.
template <typename T>
class Adam {
 public:
  struct Hyper {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
  };

  explicit Adam(Hyper hp) : hp_(hp) {}

  // Applies one update to every named parameter using its accumulated grad.
  void step(ParamStore<T>& store, const std::vector<std::string>& names) {
    ++t_;
    const T bc1 = T(1) - std::pow(hp_.beta1, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(hp_.beta2, static_cast<T>(t_));
    for (const auto& name : names) {
      Parameter<T>& p = store.at(name);
      if (!p.grad.all_finite()) {
        throw std::runtime_error("adam: non-finite gradient for parameter " + name);
      }
      Moments& mom = moments(name, p.value.shape());
      for (int i = 0; i < p.value.numel(); ++i) {
        const T g = p.grad[i];
        mom.m[i] = hp_.beta1 * mom.m[i] + (T(1) - hp_.beta1) * g;
        mom.v[i] = hp_.beta2 * mom.v[i] + (T(1) - hp_.beta2) * g * g;
        const T mhat = mom.m[i] / bc1;
        const T vhat = mom.v[i] / bc2;
        p.value[i] -= hp_.lr * mhat / (std::sqrt(vhat) + hp_.eps);
      }
    }
  }

  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }
  const Hyper& hyper() const { return hp_; }
  void set_lr(T lr) { hp_.lr = lr; }

  // Checkpoint access to the raw moment buffers.
  std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> snapshot() const {
    std::map<std::string, std::pair<Tensor<T>, Tensor<T>>> out;
    for (const auto& [name, mom] : moments_) out.emplace(name, std::make_pair(mom.m, mom.v));
    return out;
  }
  void restore(const std::string& name, Tensor<T> m, Tensor<T> v) {
    moments_[name] = Moments{std::move(m), std::move(v)};
  }

 private:
  struct Moments {
    Tensor<T> m, v;
  };

  Moments& moments(const std::string& name, const std::vector<int>& shape) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      it = moments_.emplace(name, Moments{Tensor<T>::zeros(shape), Tensor<T>::zeros(shape)}).first;
    }
    return it->second;
  }

  Hyper hp_;
  long long t_ = 0;
  std::map<std::string, Moments> moments_;
};

// Scales all gradients so their global L2 norm is at most max_norm.
template <typename T>
void clip_grad_norm(ParamStore<T>& store, const std::vector<std::string>& names, T max_norm) {
  double total = 0.0;
  for (const auto& name : names) {
    const Tensor<T>& g = store.at(name).grad;
    for (int i = 0; i < g.numel(); ++i) total += static_cast<double>(g[i]) * g[i];
  }
  const double norm = std::sqrt(total);
  if (norm <= static_cast<double>(max_norm)) return;
  const T s = static_cast<T>(static_cast<double>(max_norm) / norm);
  for (const auto& name : names) {
    Tensor<T>& g = store.at(name).grad;
    for (int i = 0; i < g.numel(); ++i) g[i] *= s;
  }
}

}  // namespace stc
