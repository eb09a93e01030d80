#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

#include "stc/tensor.hpp"

namespace stc {

// Central-difference gradient oracle: (f(x+h·e_i) − f(x−h·e_i)) / 2h.
// Independent of the tape; used to check every backward rule.
template <typename T>
Tensor<T> finite_diff_gradient(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x,
                               T h) {
  if (!(h > T(0))) throw std::invalid_argument("finite_diff_gradient: h must be positive");
  Tensor<T> g(x.shape());
  Tensor<T> probe = x;
  for (int i = 0; i < x.numel(); ++i) {
    const T orig = probe[i];
    probe[i] = orig + h;
    const T fp = f(probe);
    probe[i] = orig - h;
    const T fm = f(probe);
    probe[i] = orig;
    g[i] = (fp - fm) / (T(2) * h);
  }
  return g;
}

// max_i |a_i − b_i| / max(1, |a_i|, |b_i|)
template <typename T>
T max_relative_error(const Tensor<T>& a, const Tensor<T>& b) {
  a.require_same_shape(b, "max_relative_error");
  T worst{};
  for (int i = 0; i < a.numel(); ++i) {
    const T denom = std::max(T(1), std::max(std::abs(a[i]), std::abs(b[i])));
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace stc
