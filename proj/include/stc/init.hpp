#pragma once

#include <cmath>
#include <random>
#include <string>

#include "stc/graph.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Uniform ±1/sqrt(fan_in) kernel init; fan_in = Cin·kh·kw.
template <typename T>
Parameter<T>& init_conv(ParamStore<T>& store, const std::string& name, int cout, int cin, int kh,
                        int kw, std::mt19937& rng) {
  return store.get_or_create(name, [&]() {
    const T bound = T(1) / std::sqrt(static_cast<T>(cin * kh * kw));
    return random_uniform<T>({cout, cin, kh, kw}, -bound, bound, rng);
  });
}

template <typename T>
Parameter<T>& init_bias(ParamStore<T>& store, const std::string& name, int c, T value = T(0)) {
  return store.get_or_create(name, [&]() { return Tensor<T>::full({c}, value); });
}

}  // namespace stc
