#pragma once

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "stc/graph.hpp"
#include "stc/stlstm.hpp"
#include "stc/tensor.hpp"

namespace stc {

struct GeneratorConfig {
  int num_layers = 4;
  int hidden = 64;
  int kernel = 5;
  int patch = 4;          // space-to-depth factor
  int context = 8;        // i: frames before / after the targets
  int horizon = 5;        // p: predicted frames
  int frame_channels = 1;

  int patch_channels() const { return frame_channels * patch * patch; }

  void validate() const {
    if (num_layers < 1 || context < 1 || horizon < 1 || hidden < 1 || patch < 1 ||
        frame_channels < 1 || kernel < 1 || kernel % 2 == 0) {
      throw std::invalid_argument("generator config: invalid dimensions");
    }
  }
};

// One window of batched frames: |before| = |after| = i, |targets| = p,
// all [B,C,H,W] in source order.
template <typename T>
struct WindowBatch {
  std::vector<Tensor<T>> before;
  std::vector<Tensor<T>> targets;
  std::vector<Tensor<T>> after;
};

struct RssSchedule {
  double start_prob = 0.5;
  double end_prob = 1.0;
  long long ramp_iters = 5000;
};

// Reverse scheduled sampling: per-context-step booleans, true = feed the
// ground-truth frame. The feed-true probability ramps linearly from
// start_prob to end_prob over ramp_iters. Step 0 is always true (there is
// no previous prediction to feed).
inline std::vector<bool> reverse_scheduled_mask(long long iteration, int context_steps,
                                                const RssSchedule& s, std::mt19937& rng) {
  if (s.start_prob < 0 || s.start_prob > 1 || s.end_prob < 0 || s.end_prob > 1) {
    throw std::invalid_argument("reverse_scheduled_mask: probabilities outside [0,1]");
  }
  const double frac =
      s.ramp_iters <= 0 ? 1.0 : std::min(1.0, static_cast<double>(iteration) / s.ramp_iters);
  const double prob = s.start_prob + (s.end_prob - s.start_prob) * frac;
  std::vector<bool> mask(static_cast<std::size_t>(context_steps));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < context_steps; ++i) {
    mask[static_cast<std::size_t>(i)] = (i == 0) || (u(rng) < prob);
  }
  return mask;
}

enum class Direction { forward, backward };

template <typename T>
struct DirectionalRollout {
  std::vector<Value> hidden;       // top-layer H per step
  std::vector<Value> predictions;  // per-step decoded next-frame estimate (patch space)
  std::vector<DecoupleIncrements<T>> increments;  // one per (step, layer), step-major
  std::vector<Value> zigzag_in;    // layer-0 M input per step
  std::vector<Value> zigzag_out;   // top-layer M output per step
  int steps = 0;
  int layers = 0;

  // Prediction for the k-th frame past the context (k = 0 is the first).
  Value generated(int context_len, int k) const {
    return predictions[static_cast<std::size_t>(context_len - 1 + k)];
  }

  // Top-layer hidden state at the step that generates that frame.
  Value generated_hidden(int context_len, int k) const {
    return hidden[static_cast<std::size_t>(context_len - 1 + k)];
  }
};

template <typename T>
struct PredictOutput {
  std::vector<Value> frames;  // P̂, frame space, ordered to match P
  std::vector<DecoupleIncrements<T>> increments;
  int total_steps = 0;  // across both directions
  int layers = 0;
};

// The 4-layer (configurable) ST-LSTM prediction network with zigzag memory
// flow, a shared 1×1 fusion decode and per-direction parameter stacks.
template <typename T>
class GeneratorNet {
 public:
  static constexpr const char* kPrefix = "gen.";

  GeneratorNet(Graph<T>& g, ParamStore<T>& store, const GeneratorConfig& cfg, std::mt19937& rng)
      : g_(&g), cfg_(cfg) {
    cfg_.validate();
    const int pc = cfg_.patch_channels();
    for (int l = 0; l < cfg_.num_layers; ++l) {
      const int in_ch = l == 0 ? pc : cfg_.hidden;
      fwd_.push_back(STLSTMParams<T>::bind(g, store, layer_prefix(Direction::forward, l), in_ch,
                                           cfg_.hidden, cfg_.kernel, rng));
      bwd_.push_back(STLSTMParams<T>::bind(g, store, layer_prefix(Direction::backward, l), in_ch,
                                           cfg_.hidden, cfg_.kernel, rng));
    }
    init_conv(store, std::string(kPrefix) + "fuse.w", pc, 2 * cfg_.hidden, 1, 1, rng);
    init_bias(store, std::string(kPrefix) + "fuse.b", pc);
    fuse_w_ = g.param(store, std::string(kPrefix) + "fuse.w");
    fuse_b_ = g.param(store, std::string(kPrefix) + "fuse.b");
  }

  static std::string layer_prefix(Direction d, int l) {
    return std::string(kPrefix) + (d == Direction::forward ? "f.l" : "b.l") + std::to_string(l) +
           ".";
  }

  const GeneratorConfig& config() const { return cfg_; }

  // Number of cell steps a rollout executes for the given context length
  // and number of frames to generate.
  static int rollout_steps(int context_len, int steps_to_generate) {
    return context_len + (steps_to_generate > 0 ? steps_to_generate - 1 : 0);
  }

  // Rolls one directional stack over `frames` (patch space) and then
  // autoregressively for steps_to_generate further frames. At each step the
  // layer-0 input is the true frame where the mask is true, otherwise the
  // previous step's own decoded prediction. M flows bottom→top within a
  // step and top→bottom across steps; C and H stay within their layer.
  DirectionalRollout<T> directional_rollout(const std::vector<Value>& frames,
                                            const std::vector<bool>& mask, int steps_to_generate,
                                            Direction dir) {
    if (frames.empty()) throw std::invalid_argument("directional_rollout: no frames");
    const int total = rollout_steps(static_cast<int>(frames.size()), steps_to_generate);
    if (static_cast<int>(mask.size()) != total) {
      throw std::invalid_argument("directional_rollout: mask length " +
                                  std::to_string(mask.size()) + " != steps " +
                                  std::to_string(total));
    }
    const auto& stack = dir == Direction::forward ? fwd_ : bwd_;
    const Tensor<T>& f0 = g_->val(frames[0]);
    const int B = f0.dim(0), H = f0.dim(2), W = f0.dim(3);

    std::vector<STLSTMState<T>> states;
    for (int l = 0; l < cfg_.num_layers; ++l) {
      states.push_back(stlstm_init_state(*g_, B, cfg_.hidden, H, W));
    }
    Value m_carry = states.back().m;  // zigzag input for step 0

    DirectionalRollout<T> out;
    out.steps = total;
    out.layers = cfg_.num_layers;
    for (int s = 0; s < total; ++s) {
      Value x;
      if (mask[static_cast<std::size_t>(s)]) {
        if (s >= static_cast<int>(frames.size())) {
          throw std::invalid_argument("directional_rollout: mask true past the context frames");
        }
        x = frames[static_cast<std::size_t>(s)];
      } else {
        x = s == 0 ? frames[0] : out.predictions.back();
      }
      Value m_in = m_carry;
      out.zigzag_in.push_back(m_in);
      for (int l = 0; l < cfg_.num_layers; ++l) {
        Value input = l == 0 ? x : states[static_cast<std::size_t>(l - 1)].h;
        auto [st, inc] =
            stlstm_step(*g_, input, states[static_cast<std::size_t>(l)].h,
                        states[static_cast<std::size_t>(l)].c, m_in, stack[static_cast<std::size_t>(l)]);
        m_in = st.m;
        states[static_cast<std::size_t>(l)] = st;
        out.increments.push_back(inc);
      }
      m_carry = states.back().m;
      out.zigzag_out.push_back(m_carry);
      out.hidden.push_back(states.back().h);
      out.predictions.push_back(decode_one(states.back().h, dir));
    }
    return out;
  }

  // Concatenates the two hidden states, reduces with the 1×1 fusion kernel
  // and returns to frame space.
  Value fuse_hidden(Value h_forward, Value h_backward) {
    g_->val(h_forward).require_same_shape(g_->val(h_backward), "fuse_hidden");
    Value patch = g_->bias_add(g_->conv2d(g_->concat_channels(h_forward, h_backward), fuse_w_),
                               fuse_b_);
    return g_->depth_to_space(patch, cfg_.patch);
  }

  // Full bidirectional prediction of P̂ for one window. The forward stack
  // rolls over F, the backward stack over reversed B; target steps are
  // always self-fed. With bidirectional=false the backward slot is zero.
  PredictOutput<T> predict_window(const WindowBatch<T>& w, const std::vector<bool>& context_mask,
                                  bool bidirectional = true) {
    const int i = cfg_.context, p = cfg_.horizon;
    if (static_cast<int>(w.before.size()) != i || static_cast<int>(w.after.size()) != i) {
      throw std::invalid_argument("predict_window: context size " +
                                  std::to_string(w.before.size()) + "/" +
                                  std::to_string(w.after.size()) + ", expected " +
                                  std::to_string(i));
    }
    std::vector<bool> mask(static_cast<std::size_t>(rollout_steps(i, p)), false);
    if (static_cast<int>(context_mask.size()) != i) {
      throw std::invalid_argument("predict_window: context mask size mismatch");
    }
    for (int s = 0; s < i; ++s) mask[static_cast<std::size_t>(s)] = context_mask[static_cast<std::size_t>(s)];

    auto enter = [&](const Tensor<T>& f) {
      return g_->space_to_depth(g_->leaf(f), cfg_.patch);
    };
    std::vector<Value> f_frames;
    for (const auto& f : w.before) f_frames.push_back(enter(f));

    PredictOutput<T> out;
    out.layers = cfg_.num_layers;
    DirectionalRollout<T> fwd = directional_rollout(f_frames, mask, p, Direction::forward);
    out.total_steps += fwd.steps;
    out.increments.insert(out.increments.end(), fwd.increments.begin(), fwd.increments.end());

    if (bidirectional) {
      std::vector<Value> b_frames;
      for (auto it = w.after.rbegin(); it != w.after.rend(); ++it) b_frames.push_back(enter(*it));
      DirectionalRollout<T> bwd = directional_rollout(b_frames, mask, p, Direction::backward);
      out.total_steps += bwd.steps;
      out.increments.insert(out.increments.end(), bwd.increments.begin(), bwd.increments.end());
      for (int k = 0; k < p; ++k) {
        out.frames.push_back(
            fuse_hidden(fwd.generated_hidden(i, k), bwd.generated_hidden(i, p - 1 - k)));
      }
    } else {
      for (int k = 0; k < p; ++k) {
        Value hf = fwd.generated_hidden(i, k);
        out.frames.push_back(fuse_hidden(hf, g_->leaf(Tensor<T>::zeros(g_->val(hf).shape()))));
      }
    }
    return out;
  }

 private:
  // Per-direction decode used for self-feeding: the direction's own hidden
  // state in its fusion slot, zeros in the other. Stays in patch space.
  Value decode_one(Value h, Direction dir) {
    Value zeros = g_->leaf(Tensor<T>::zeros(g_->val(h).shape()));
    Value cat = dir == Direction::forward ? g_->concat_channels(h, zeros)
                                          : g_->concat_channels(zeros, h);
    return g_->bias_add(g_->conv2d(cat, fuse_w_), fuse_b_);
  }

  Graph<T>* g_;
  GeneratorConfig cfg_;
  std::vector<STLSTMParams<T>> fwd_, bwd_;
  Value fuse_w_, fuse_b_;
};

}  // namespace stc
