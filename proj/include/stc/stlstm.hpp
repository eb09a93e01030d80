#pragma once

#include <random>
#include <string>

#include "stc/graph.hpp"
#include "stc/init.hpp"
#include "stc/tensor.hpp"

namespace stc {

// Hidden state, temporal memory and unified spatial-temporal memory of one
// ST-LSTM layer, all [B,Ch,H,W].
template <typename T>
struct STLSTMState {
  Value h, c, m;
};

// Per-step memory increments feeding the decouple loss.
template <typename T>
struct DecoupleIncrements {
  Value dc, dm;
};

// Tape handles for one layer's kernels and biases. Gate kernels are k×k;
// the fusion kernel is 1×1 over the concatenated [C,M] channels and the
// shared increment kernel w_dec is 1×1.
template <typename T>
struct STLSTMParams {
  // temporal path (input x, hidden H)
  Value w_xi, w_hi, b_i;
  Value w_xf, w_hf, b_f;
  Value w_xg, w_hg, b_g;
  // spatial-temporal path (input x, memory M)
  Value wp_xi, wp_mi, bp_i;
  Value wp_xf, wp_mf, bp_f;
  Value wp_xg, w_mg, bp_g;
  // output gate and fusion
  Value w_xo, w_ho, w_co, w_mo, b_o;
  Value w_fuse;
  // shared 1×1 kernel of the increment projections
  Value w_dec;
  int kernel = 5;

  // Creates the layer's parameters in the store on first use (forget-gate
  // biases start at +1) and binds them to the graph.
  static STLSTMParams bind(Graph<T>& g, ParamStore<T>& store, const std::string& prefix,
                           int in_ch, int hid_ch, int kernel, std::mt19937& rng) {
    auto conv = [&](const std::string& n, int co, int ci, int k) {
      init_conv(store, prefix + n, co, ci, k, k, rng);
      return g.param(store, prefix + n);
    };
    auto bias = [&](const std::string& n, T v) {
      init_bias(store, prefix + n, hid_ch, v);
      return g.param(store, prefix + n);
    };
    STLSTMParams p;
    p.kernel = kernel;
    p.w_xi = conv("w_xi", hid_ch, in_ch, kernel);
    p.w_hi = conv("w_hi", hid_ch, hid_ch, kernel);
    p.b_i = bias("b_i", T(0));
    p.w_xf = conv("w_xf", hid_ch, in_ch, kernel);
    p.w_hf = conv("w_hf", hid_ch, hid_ch, kernel);
    p.b_f = bias("b_f", T(1));
    p.w_xg = conv("w_xg", hid_ch, in_ch, kernel);
    p.w_hg = conv("w_hg", hid_ch, hid_ch, kernel);
    p.b_g = bias("b_g", T(0));
    p.wp_xi = conv("wp_xi", hid_ch, in_ch, kernel);
    p.wp_mi = conv("wp_mi", hid_ch, hid_ch, kernel);
    p.bp_i = bias("bp_i", T(0));
    p.wp_xf = conv("wp_xf", hid_ch, in_ch, kernel);
    p.wp_mf = conv("wp_mf", hid_ch, hid_ch, kernel);
    p.bp_f = bias("bp_f", T(1));
    p.wp_xg = conv("wp_xg", hid_ch, in_ch, kernel);
    p.w_mg = conv("w_mg", hid_ch, hid_ch, kernel);
    p.bp_g = bias("bp_g", T(0));
    p.w_xo = conv("w_xo", hid_ch, in_ch, kernel);
    p.w_ho = conv("w_ho", hid_ch, hid_ch, kernel);
    p.w_co = conv("w_co", hid_ch, hid_ch, kernel);
    p.w_mo = conv("w_mo", hid_ch, hid_ch, kernel);
    p.b_o = bias("b_o", T(0));
    p.w_fuse = conv("w_fuse", hid_ch, 2 * hid_ch, 1);
    p.w_dec = conv("w_dec", hid_ch, hid_ch, 1);
    return p;
  }
};

// Zero-initialized state for one layer.
template <typename T>
STLSTMState<T> stlstm_init_state(Graph<T>& g, int batch, int channels, int height, int width) {
  if (batch < 1 || channels < 1 || height < 1 || width < 1) {
    throw std::invalid_argument("stlstm_init_state: dims must be positive");
  }
  Tensor<T> z({batch, channels, height, width});
  return {g.leaf(z), g.leaf(z), g.leaf(z)};
}

// One cell update.
//   i_t  = σ(W_xi*x + W_hi*H + b_i)        f_t  = σ(W_xf*x + W_hf*H + b_f)
//   g_t  = tanh(W_xg*x + W_hg*H + b_g)     C'   = f_t⊙C + i_t⊙g_t
//   i'_t = σ(W'_xi*x + W'_mi*M + b'_i)     f'_t = σ(W'_xf*x + W'_mf*M + b'_f)
//   g'_t = tanh(W'_xg*x + W_mg*M + b'_g)   M'   = f'_t⊙M + i'_t⊙g'_t
//   o_t  = σ(W_xo*x + W_ho*H + W_co*C' + W_mo*M' + b_o)
//   H'   = o_t ⊙ tanh(W_1×1*[C', M'])
//   ΔC   = W_c*(i_t⊙g_t)                   ΔM   = W_c*(i'_t⊙g'_t)
template <typename T>
std::pair<STLSTMState<T>, DecoupleIncrements<T>> stlstm_step(Graph<T>& g, Value x, Value h_prev,
                                                             Value c_prev, Value m_in,
                                                             const STLSTMParams<T>& p) {
  if (g.val(x).dim(2) != g.val(h_prev).dim(2) || g.val(x).dim(3) != g.val(h_prev).dim(3) ||
      g.val(x).dim(0) != g.val(h_prev).dim(0)) {
    throw std::invalid_argument("stlstm_step: input " + g.val(x).shape_str() +
                                " incompatible with state " + g.val(h_prev).shape_str());
  }
  g.val(h_prev).require_same_shape(g.val(c_prev), "stlstm_step state");
  g.val(h_prev).require_same_shape(g.val(m_in), "stlstm_step memory");

  const int pad = (p.kernel - 1) / 2;
  auto gate = [&](Value wx, Value wh, Value hs, Value b) {
    return g.bias_add(g.add(g.conv2d(x, wx, 1, pad), g.conv2d(hs, wh, 1, pad)), b);
  };

  Value i_t = g.sigmoid(gate(p.w_xi, p.w_hi, h_prev, p.b_i));
  Value f_t = g.sigmoid(gate(p.w_xf, p.w_hf, h_prev, p.b_f));
  Value g_t = g.tanh_(gate(p.w_xg, p.w_hg, h_prev, p.b_g));
  Value c_inc = g.mul(i_t, g_t);
  Value c_new = g.add(g.mul(f_t, c_prev), c_inc);

  Value ip_t = g.sigmoid(gate(p.wp_xi, p.wp_mi, m_in, p.bp_i));
  Value fp_t = g.sigmoid(gate(p.wp_xf, p.wp_mf, m_in, p.bp_f));
  Value gp_t = g.tanh_(gate(p.wp_xg, p.w_mg, m_in, p.bp_g));
  Value m_inc = g.mul(ip_t, gp_t);
  Value m_new = g.add(g.mul(fp_t, m_in), m_inc);

  Value o_pre = g.add(g.add(g.conv2d(x, p.w_xo, 1, pad), g.conv2d(h_prev, p.w_ho, 1, pad)),
                      g.add(g.conv2d(c_new, p.w_co, 1, pad), g.conv2d(m_new, p.w_mo, 1, pad)));
  Value o_t = g.sigmoid(g.bias_add(o_pre, p.b_o));
  Value h_new = g.mul(o_t, g.tanh_(g.conv2d(g.concat_channels(c_new, m_new), p.w_fuse)));

  DecoupleIncrements<T> inc{g.conv2d(c_inc, p.w_dec), g.conv2d(m_inc, p.w_dec)};
  return {STLSTMState<T>{h_new, c_new, m_new}, inc};
}

}  // namespace stc
