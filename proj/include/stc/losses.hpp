#pragma once

#include <stdexcept>
#include <vector>

#include "stc/graph.hpp"
#include "stc/stlstm.hpp"
#include "stc/tensor.hpp"

namespace stc {

struct LossWeights {
  double intensity = 1.0;
  double gradient = 1.0;
  double adversarial = 0.05;
  double decouple = 1.0;
};

template <typename T>
struct LossBundle {
  T intensity = 0;
  T gradient = 0;
  T adversarial_g = 0;
  T decouple = 0;
  T total_g = 0;
  T total_d = 0;
};

// MSE over all frames and pixels of the predicted vs. target sequence.
template <typename T>
Value intensity_loss(Graph<T>& g, const std::vector<Value>& predicted,
                     const std::vector<Value>& target) {
  if (predicted.empty() || predicted.size() != target.size()) {
    throw std::invalid_argument("intensity_loss: sequence length mismatch");
  }
  Value acc = g.mse_mean(predicted[0], target[0]);
  for (std::size_t k = 1; k < predicted.size(); ++k) {
    acc = g.add(acc, g.mse_mean(predicted[k], target[k]));
  }
  return g.scale(acc, T(1) / static_cast<T>(predicted.size()));
}

// Per frame: sum over pixels of ||∂ᵥx̂|-|∂ᵥx|| + ||∂ₕx̂|-|∂ₕx|| with
// one-pixel backward differences, summed over frames, divided by the pixel
// count per frame and batch-averaged.
template <typename T>
Value gradient_loss(Graph<T>& g, const std::vector<Value>& predicted,
                    const std::vector<Value>& target) {
  if (predicted.empty() || predicted.size() != target.size()) {
    throw std::invalid_argument("gradient_loss: sequence length mismatch");
  }
  const Tensor<T>& f0 = g.val(predicted[0]);
  if (f0.dim(2) < 2 || f0.dim(3) < 2) {
    throw std::invalid_argument("gradient_loss: frames smaller than 2x2: " + f0.shape_str());
  }
  const T norm = T(1) / static_cast<T>(f0.dim(0) * f0.dim(2) * f0.dim(3));
  Value acc;
  for (std::size_t k = 0; k < predicted.size(); ++k) {
    for (int axis = 0; axis < 2; ++axis) {
      Value dp = g.abs_(g.spatial_diff(predicted[k], axis));
      Value dt = g.abs_(g.spatial_diff(target[k], axis));
      Value term = g.sum_all(g.abs_(g.sub(dp, dt)));
      acc = acc.valid() ? g.add(acc, term) : term;
    }
  }
  return g.scale(acc, norm);
}

// Sum over (t,l) of batch-averaged |<ΔC,ΔM>| / (‖ΔC‖‖ΔM‖); near-zero-norm
// terms contribute 0 and are tallied in guarded_count.
template <typename T>
Value decouple_loss(Graph<T>& g, const std::vector<DecoupleIncrements<T>>& increments,
                    int* guarded_count = nullptr) {
  if (increments.empty()) throw std::invalid_argument("decouple_loss: no increments");
  Value acc;
  for (const auto& inc : increments) {
    Value term = g.cosine_abs_batchmean(inc.dc, inc.dm, T(1e-12), guarded_count);
    acc = acc.valid() ? g.add(acc, term) : term;
  }
  return acc;
}

// λ_int·L_int + λ_gd·L_gd + λ_adv·L_adv + λ_dec·L_dec. Pass an invalid
// Value to drop a component (its weight is treated as zero).
template <typename T>
Value generator_total_loss(Graph<T>& g, Value intensity, Value gradient, Value adversarial,
                           Value decouple, const LossWeights& w) {
  Value acc;
  auto add_term = [&](Value v, double lambda) {
    if (!v.valid()) return;
    Value scaled = g.scale(v, static_cast<T>(lambda));
    acc = acc.valid() ? g.add(acc, scaled) : scaled;
  };
  add_term(intensity, w.intensity);
  add_term(gradient, w.gradient);
  add_term(adversarial, w.adversarial);
  add_term(decouple, w.decouple);
  if (!acc.valid()) throw std::invalid_argument("generator_total_loss: no components");
  return acc;
}

}  // namespace stc
