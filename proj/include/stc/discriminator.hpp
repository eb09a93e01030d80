#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/graph.hpp"
#include "stc/init.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Strided patch-discriminator stack. Each hidden layer halves the spatial
// dims with leaky-ReLU activations; the final layer is linear with one
// output channel, giving one real/fake score per spatial patch.
struct DiscriminatorConfig {
  std::vector<int> channels = {64, 128, 256, 1};
  int kernel = 4;
  int stride = 2;
  double leaky_slope = 0.2;
  int sequence_length = 5;  // p frames, concatenated along channels
  int frame_channels = 1;

  void validate() const {
    if (channels.empty() || channels.back() != 1) {
      throw std::invalid_argument("discriminator: final layer must output one channel");
    }
  }
};

template <typename T>
class DiscriminatorNet {
 public:
  static constexpr const char* kPrefix = "disc.";

  DiscriminatorNet(Graph<T>& g, ParamStore<T>& store, const DiscriminatorConfig& cfg,
                   std::mt19937& rng)
      : g_(&g), cfg_(cfg) {
    cfg_.validate();
    int in_ch = cfg_.sequence_length * cfg_.frame_channels;
    for (std::size_t l = 0; l < cfg_.channels.size(); ++l) {
      const std::string base = std::string(kPrefix) + "l" + std::to_string(l) + ".";
      init_conv(store, base + "w", cfg_.channels[l], in_ch, cfg_.kernel, cfg_.kernel, rng);
      init_bias<T>(store, base + "b", cfg_.channels[l]);
      weights_.push_back(g.param(store, base + "w"));
      biases_.push_back(g.param(store, base + "b"));
      in_ch = cfg_.channels[l];
    }
  }

  // Scores a p-frame sequence: frames concatenated channel-wise, then the
  // strided stack; no output nonlinearity. Returns the patch grid.
  Value discriminate(const std::vector<Value>& seq) {
    if (static_cast<int>(seq.size()) != cfg_.sequence_length) {
      throw std::invalid_argument("discriminate: sequence length " + std::to_string(seq.size()) +
                                  " != configured " + std::to_string(cfg_.sequence_length));
    }
    Value x = seq[0];
    for (std::size_t k = 1; k < seq.size(); ++k) x = g_->concat_channels(x, seq[k]);
    const int pad = (cfg_.kernel - cfg_.stride) / 2;  // e.g. 4/2 -> pad 1 halves dims exactly
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      x = g_->bias_add(g_->conv2d(x, weights_[l], cfg_.stride, pad), biases_[l]);
      if (l + 1 < weights_.size()) x = g_->leaky_relu(x, static_cast<T>(cfg_.leaky_slope));
    }
    return x;
  }

 private:
  Graph<T>* g_;
  DiscriminatorConfig cfg_;
  std::vector<Value> weights_, biases_;
};

// Least-squares discriminator loss: mean over patches of ½(real−1)² plus
// mean over patches of ½(fake−0)².
template <typename T>
Value lsgan_d_loss(Graph<T>& g, Value real_grid, Value fake_grid) {
  g.val(real_grid).require_same_shape(g.val(fake_grid), "lsgan_d_loss");
  Value ones = g.leaf(Tensor<T>::full(g.val(real_grid).shape(), T(1)));
  Value zeros = g.leaf(Tensor<T>::zeros(g.val(fake_grid).shape()));
  return g.add(g.scale(g.mse_mean(real_grid, ones), T(0.5)),
               g.scale(g.mse_mean(fake_grid, zeros), T(0.5)));
}

// Least-squares generator loss: mean over patches of ½(fake−1)².
template <typename T>
Value lsgan_g_loss(Graph<T>& g, Value fake_grid) {
  Value ones = g.leaf(Tensor<T>::full(g.val(fake_grid).shape(), T(1)));
  return g.scale(g.mse_mean(fake_grid, ones), T(0.5));
}

}  // namespace stc
