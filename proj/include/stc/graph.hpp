#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stc/tensor.hpp"

namespace stc {

// Named trainable tensor with an accumulated gradient of matching shape.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;

  explicit Parameter(std::string n, Tensor<T> v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor<T>::zeros(value.shape())) {}

  void zero_grad() { grad.fill(T{}); }
};

// Ordered, name-keyed parameter storage shared by model and optimizer.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& create(const std::string& name, Tensor<T> init) {
    auto [it, inserted] = params_.emplace(name, Parameter<T>(name, std::move(init)));
    if (!inserted) throw std::invalid_argument("param already exists: " + name);
    return it->second;
  }

  Parameter<T>& get_or_create(const std::string& name, const std::function<Tensor<T>()>& init) {
    auto it = params_.find(name);
    if (it != params_.end()) return it->second;
    return create(name, init());
  }

  Parameter<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such param: " + name);
    return it->second;
  }
  const Parameter<T>& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no such param: " + name);
    return it->second;
  }
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  void zero_grads() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  std::vector<std::string> names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& [name, p] : params_) {
      if (name.rfind(prefix, 0) == 0) out.push_back(name);
    }
    return out;
  }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }
  std::size_t size() const { return params_.size(); }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& [name, p] : params_) out.create(name, p.value.template cast<U>());
    return out;
  }

 private:
  std::map<std::string, Parameter<T>> params_;
};

// Handle into a Graph's tape.
struct Value {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape over Tensor<T>. Append-only: node order is a valid
// topological order, so backward() is a single reverse sweep.
// When constructed with recording=false the tape stores values only
// (inference mode: no gradients, no backward closures).
template <typename T>
class Graph {
 public:
  explicit Graph(bool recording = true) : recording_(recording) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool recording() const { return recording_; }

  Value leaf(Tensor<T> v, bool needs_grad = false) {
    return push(std::move(v), recording_ && needs_grad, {});
  }

  Value constant(T v) { return leaf(Tensor<T>::scalar(v)); }

  // Binds a stored parameter as a tape leaf; backward() accumulates its
  // gradient back into the store.
  Value param(ParamStore<T>& store, const std::string& name) {
    Parameter<T>& p = store.at(name);
    Value v = push(p.value, recording_, {});
    if (recording_) bound_params_.emplace_back(v.id, &p);
    return v;
  }

  const Tensor<T>& val(Value v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
  const Tensor<T>& grad(Value v) const {
    const Node& n = nodes_[static_cast<std::size_t>(v.id)];
    if (!n.needs_grad) throw std::logic_error("grad requested for non-differentiable node");
    return n.grad;
  }

  // ---- elementwise ----

  Value add(Value a, Value b) {
    val(a).require_same_shape(val(b), "add");
    Tensor<T> out = val(a);
    out.add_inplace(val(b));
    return binary(std::move(out), a, b, [this](Value o, Value a2, Value b2) {
      accum(a2, [&](Tensor<T>& g) { g.add_inplace(grad_of(o)); });
      accum(b2, [&](Tensor<T>& g) { g.add_inplace(grad_of(o)); });
    });
  }

  Value sub(Value a, Value b) {
    val(a).require_same_shape(val(b), "sub");
    Tensor<T> out = val(a);
    const Tensor<T>& vb = val(b);
    for (int i = 0; i < out.numel(); ++i) out[i] -= vb[i];
    return binary(std::move(out), a, b, [this](Value o, Value a2, Value b2) {
      accum(a2, [&](Tensor<T>& g) { g.add_inplace(grad_of(o)); });
      accum(b2, [&](Tensor<T>& g) {
        const Tensor<T>& go = grad_of(o);
        for (int i = 0; i < g.numel(); ++i) g[i] -= go[i];
      });
    });
  }

  // Hadamard product.
  Value mul(Value a, Value b) {
    val(a).require_same_shape(val(b), "hadamard");
    Tensor<T> out = val(a);
    const Tensor<T>& vb = val(b);
    for (int i = 0; i < out.numel(); ++i) out[i] *= vb[i];
    return binary(std::move(out), a, b, [this](Value o, Value a2, Value b2) {
      const Tensor<T>& go = grad_of(o);
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& vb2 = val(b2);
        for (int i = 0; i < g.numel(); ++i) g[i] += go[i] * vb2[i];
      });
      accum(b2, [&](Tensor<T>& g) {
        const Tensor<T>& va2 = val(a2);
        for (int i = 0; i < g.numel(); ++i) g[i] += go[i] * va2[i];
      });
    });
  }

  Value scale(Value a, T s) {
    Tensor<T> out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] *= s;
    return unary(std::move(out), a, [this, s](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& go = grad_of(o);
        for (int i = 0; i < g.numel(); ++i) g[i] += s * go[i];
      });
    });
  }

  Value sigmoid(Value a) {
    Tensor<T> out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = T(1) / (T(1) + std::exp(-out[i]));
    return unary(std::move(out), a, [this](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& y = val(o);
        const Tensor<T>& go = grad_of(o);
        for (int i = 0; i < g.numel(); ++i) g[i] += go[i] * y[i] * (T(1) - y[i]);
      });
    });
  }

  Value tanh_(Value a) {
    Tensor<T> out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = std::tanh(out[i]);
    return unary(std::move(out), a, [this](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& y = val(o);
        const Tensor<T>& go = grad_of(o);
        for (int i = 0; i < g.numel(); ++i) g[i] += go[i] * (T(1) - y[i] * y[i]);
      });
    });
  }

  Value leaky_relu(Value a, T slope) {
    Tensor<T> out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = out[i] > T(0) ? out[i] : slope * out[i];
    return unary(std::move(out), a, [this, slope](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& x = val(a2);
        const Tensor<T>& go = grad_of(o);
        for (int i = 0; i < g.numel(); ++i) g[i] += go[i] * (x[i] > T(0) ? T(1) : slope);
      });
    });
  }

  Value abs_(Value a) {
    Tensor<T> out = val(a);
    for (int i = 0; i < out.numel(); ++i) out[i] = std::abs(out[i]);
    return unary(std::move(out), a, [this](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& x = val(a2);
        const Tensor<T>& go = grad_of(o);
        // subgradient 0 at the kink
        for (int i = 0; i < g.numel(); ++i)
          g[i] += go[i] * (x[i] > T(0) ? T(1) : (x[i] < T(0) ? T(-1) : T(0)));
      });
    });
  }

  // ---- structural ----

  Value concat_channels(Value a, Value b) {
    const Tensor<T>& va = val(a);
    const Tensor<T>& vb = val(b);
    check4(va, "concat");
    check4(vb, "concat");
    if (va.dim(0) != vb.dim(0) || va.dim(2) != vb.dim(2) || va.dim(3) != vb.dim(3)) {
      throw std::invalid_argument("concat: incompatible shapes " + va.shape_str() + " vs " +
                                  vb.shape_str());
    }
    const int B = va.dim(0), Ca = va.dim(1), Cb = vb.dim(1), H = va.dim(2), W = va.dim(3);
    Tensor<T> out({B, Ca + Cb, H, W});
    const int plane = H * W;
    for (int bi = 0; bi < B; ++bi) {
      std::copy(va.data() + bi * Ca * plane, va.data() + (bi + 1) * Ca * plane,
                out.data() + bi * (Ca + Cb) * plane);
      std::copy(vb.data() + bi * Cb * plane, vb.data() + (bi + 1) * Cb * plane,
                out.data() + (bi * (Ca + Cb) + Ca) * plane);
    }
    return binary(std::move(out), a, b, [this, B, Ca, Cb, plane](Value o, Value a2, Value b2) {
      const Tensor<T>& go = grad_of(o);
      accum(a2, [&](Tensor<T>& g) {
        for (int bi = 0; bi < B; ++bi)
          for (int i = 0; i < Ca * plane; ++i)
            g[bi * Ca * plane + i] += go[bi * (Ca + Cb) * plane + i];
      });
      accum(b2, [&](Tensor<T>& g) {
        for (int bi = 0; bi < B; ++bi)
          for (int i = 0; i < Cb * plane; ++i)
            g[bi * Cb * plane + i] += go[(bi * (Ca + Cb) + Ca) * plane + i];
      });
    });
  }

  // [B,C,H,W] -> [B,C*f*f,H/f,W/f]; inverse of depth_to_space, bit-exact.
  Value space_to_depth(Value a, int f) {
    Tensor<T> out = space_to_depth_tensor(val(a), f);
    return unary(std::move(out), a, [this, f](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) { g.add_inplace(depth_to_space_tensor(grad_of(o), f)); });
    });
  }

  Value depth_to_space(Value a, int f) {
    Tensor<T> out = depth_to_space_tensor(val(a), f);
    return unary(std::move(out), a, [this, f](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) { g.add_inplace(space_to_depth_tensor(grad_of(o), f)); });
    });
  }

  // One-pixel backward difference over the valid region.
  // axis 0: out[h][w] = x[h][w] - x[h-1][w], shape [B,C,H-1,W]
  // axis 1: out[h][w] = x[h][w] - x[h][w-1], shape [B,C,H,W-1]
  Value spatial_diff(Value a, int axis) {
    const Tensor<T>& x = val(a);
    check4(x, "spatial_diff");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if ((axis == 0 && H < 2) || (axis == 1 && W < 2)) {
      throw std::invalid_argument("spatial_diff: frame smaller than 2x2 " + x.shape_str());
    }
    const int Ho = axis == 0 ? H - 1 : H;
    const int Wo = axis == 1 ? W - 1 : W;
    Tensor<T> out({B, C, Ho, Wo});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < Ho; ++h)
          for (int w = 0; w < Wo; ++w) {
            const int h1 = axis == 0 ? h + 1 : h;
            const int w1 = axis == 1 ? w + 1 : w;
            out.at(b, c, h, w) = x.at(b, c, h1, w1) - x.at(b, c, h1 - (axis == 0), w1 - (axis == 1));
          }
    return unary(std::move(out), a, [this, axis, B, C, Ho, Wo](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const Tensor<T>& go = grad_of(o);
        for (int b = 0; b < B; ++b)
          for (int c = 0; c < C; ++c)
            for (int h = 0; h < Ho; ++h)
              for (int w = 0; w < Wo; ++w) {
                const int h1 = axis == 0 ? h + 1 : h;
                const int w1 = axis == 1 ? w + 1 : w;
                g.at(b, c, h1, w1) += go.at(b, c, h, w);
                g.at(b, c, h1 - (axis == 0), w1 - (axis == 1)) -= go.at(b, c, h, w);
              }
      });
    });
  }

  // Cuts the node off the tape: value preserved, no gradient flows.
  Value detach(Value a) { return leaf(val(a), false); }

  // ---- convolution (cross-correlation, zero padding) ----

  Value conv2d(Value x, Value w, int stride = 1, int padding = 0) {
    const Tensor<T>& vx = val(x);
    const Tensor<T>& vw = val(w);
    check4(vx, "conv2d input");
    check4(vw, "conv2d kernel");
    if (vx.dim(1) != vw.dim(1)) {
      throw std::invalid_argument("conv2d: input channels " + vx.shape_str() +
                                  " do not match kernel " + vw.shape_str());
    }
    const int B = vx.dim(0), Cin = vx.dim(1), H = vx.dim(2), W = vx.dim(3);
    const int Cout = vw.dim(0), kh = vw.dim(2), kw = vw.dim(3);
    const int Ho = (H + 2 * padding - kh) / stride + 1;
    const int Wo = (W + 2 * padding - kw) / stride + 1;
    if (Ho <= 0 || Wo <= 0) {
      throw std::invalid_argument("conv2d: kernel " + vw.shape_str() + " too large for input " +
                                  vx.shape_str());
    }
    Tensor<T> out({B, Cout, Ho, Wo});
    conv2d_forward(vx, vw, out, stride, padding);
    return binary(std::move(out), x, w,
                  [this, stride, padding](Value o, Value x2, Value w2) {
                    const Tensor<T>& go = grad_of(o);
                    accum(x2, [&](Tensor<T>& gx) {
                      conv2d_backward_input(gx, val(w2), go, stride, padding);
                    });
                    accum(w2, [&](Tensor<T>& gw) {
                      conv2d_backward_kernel(val(x2), gw, go, stride, padding);
                    });
                  });
  }

  // Per-channel bias broadcast over [B,C,H,W].
  Value bias_add(Value x, Value b) {
    const Tensor<T>& vx = val(x);
    const Tensor<T>& vb = val(b);
    check4(vx, "bias_add input");
    if (vb.ndim() != 1 || vb.dim(0) != vx.dim(1)) {
      throw std::invalid_argument("bias_add: bias " + vb.shape_str() + " vs input " +
                                  vx.shape_str());
    }
    const int B = vx.dim(0), C = vx.dim(1), plane = vx.dim(2) * vx.dim(3);
    Tensor<T> out = vx;
    for (int bi = 0; bi < B; ++bi)
      for (int c = 0; c < C; ++c) {
        T* p = out.data() + (bi * C + c) * plane;
        for (int i = 0; i < plane; ++i) p[i] += vb[c];
      }
    return binary(std::move(out), x, b, [this, B, C, plane](Value o, Value x2, Value b2) {
      const Tensor<T>& go = grad_of(o);
      accum(x2, [&](Tensor<T>& g) { g.add_inplace(go); });
      accum(b2, [&](Tensor<T>& g) {
        for (int bi = 0; bi < B; ++bi)
          for (int c = 0; c < C; ++c) {
            const T* p = go.data() + (bi * C + c) * plane;
            T s{};
            for (int i = 0; i < plane; ++i) s += p[i];
            g[c] += s;
          }
      });
    });
  }

  // ---- reductions ----

  Value sum_all(Value a) {
    Tensor<T> out = Tensor<T>::scalar(val(a).sum());
    return unary(std::move(out), a, [this](Value o, Value a2) {
      accum(a2, [&](Tensor<T>& g) {
        const T go = grad_of(o)[0];
        for (int i = 0; i < g.numel(); ++i) g[i] += go;
      });
    });
  }

  Value mean_all(Value a) { return scale(sum_all(a), T(1) / static_cast<T>(val(a).numel())); }

  // Mean over all elements of (a-b)^2; fused forward/backward.
  Value mse_mean(Value a, Value b) {
    const Tensor<T>& va = val(a);
    const Tensor<T>& vb = val(b);
    va.require_same_shape(vb, "mse_mean");
    const int n = va.numel();
    T acc{};
    for (int i = 0; i < n; ++i) {
      const T d = va[i] - vb[i];
      acc += d * d;
    }
    Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));
    return binary(std::move(out), a, b, [this, n](Value o, Value a2, Value b2) {
      const T go = grad_of(o)[0];
      const Tensor<T>& va2 = val(a2);
      const Tensor<T>& vb2 = val(b2);
      const T c = go * T(2) / static_cast<T>(n);
      accum(a2, [&](Tensor<T>& g) {
        for (int i = 0; i < n; ++i) g[i] += c * (va2[i] - vb2[i]);
      });
      accum(b2, [&](Tensor<T>& g) {
        for (int i = 0; i < n; ++i) g[i] -= c * (va2[i] - vb2[i]);
      });
    });
  }

  // Batch-averaged |<a,b>| / (|a| |b|) over per-sample flattenings.
  // Samples where either norm falls below `guard` contribute 0 (and no
  // gradient); `guarded_count`, when given, tallies them.
  Value cosine_abs_batchmean(Value a, Value b, T guard = T(1e-12), int* guarded_count = nullptr) {
    const Tensor<T>& va = val(a);
    const Tensor<T>& vb = val(b);
    va.require_same_shape(vb, "cosine");
    check4(va, "cosine");
    const int B = va.dim(0);
    const int n = va.numel() / B;
    std::vector<T> dots(B), nas(B), nbs(B);
    std::vector<char> active(B, 0);
    T total{};
    for (int s = 0; s < B; ++s) {
      const T* pa = va.data() + s * n;
      const T* pb = vb.data() + s * n;
      T d{}, na2{}, nb2{};
      for (int i = 0; i < n; ++i) {
        d += pa[i] * pb[i];
        na2 += pa[i] * pa[i];
        nb2 += pb[i] * pb[i];
      }
      const T na = std::sqrt(na2), nb = std::sqrt(nb2);
      dots[s] = d;
      nas[s] = na;
      nbs[s] = nb;
      if (na < guard || nb < guard) {
        if (guarded_count) ++(*guarded_count);
        continue;
      }
      active[s] = 1;
      total += std::abs(d) / (na * nb);
    }
    Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(B));
    return binary(std::move(out), a, b,
                  [this, B, n, dots, nas, nbs, active](Value o, Value a2, Value b2) {
                    const T go = grad_of(o)[0] / static_cast<T>(B);
                    const Tensor<T>& va2 = val(a2);
                    const Tensor<T>& vb2 = val(b2);
                    auto side = [&](Tensor<T>& g, const Tensor<T>& self, const Tensor<T>& other,
                                    const std::vector<T>& nself, const std::vector<T>& nother) {
                      // d/dself |<self,other>|/(|self||other|)
                      //   = sgn(d)·other/(|self||other|) − |d|·self/(|self|³|other|)
                      for (int s = 0; s < B; ++s) {
                        if (!active[s]) continue;
                        const T d = dots[s];
                        const T sgn = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                        const T inv = T(1) / (nself[s] * nother[s]);
                        const T selfterm = std::abs(d) / (nself[s] * nself[s] * nself[s] * nother[s]);
                        T* pg = g.data() + s * n;
                        const T* ps = self.data() + s * n;
                        const T* po = other.data() + s * n;
                        for (int i = 0; i < n; ++i)
                          pg[i] += go * (sgn * po[i] * inv - selfterm * ps[i]);
                      }
                    };
                    accum(a2, [&](Tensor<T>& g) { side(g, va2, vb2, nas, nbs); });
                    accum(b2, [&](Tensor<T>& g) { side(g, vb2, va2, nbs, nas); });
                  });
  }

  // ---- backward ----

  void backward(Value loss) {
    if (!recording_) throw std::logic_error("backward on a non-recording graph");
    if (val(loss).numel() != 1) {
      throw std::invalid_argument("backward: loss must be scalar, got " + val(loss).shape_str());
    }
    Node& ln = nodes_[static_cast<std::size_t>(loss.id)];
    if (!ln.needs_grad) return;  // loss independent of every parameter
    ln.grad[0] += T(1);
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.back && n.needs_grad) n.back();
    }
    for (auto& [id, p] : bound_params_) {
      p->grad.add_inplace(nodes_[static_cast<std::size_t>(id)].grad);
    }
  }

  std::size_t num_nodes() const { return nodes_.size(); }

  // ---- tensor-level helpers (shared with the data module) ----

  static Tensor<T> space_to_depth_tensor(const Tensor<T>& x, int f) {
    check4(x, "space_to_depth");
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    if (f < 1 || H % f != 0 || W % f != 0) {
      throw std::invalid_argument("space_to_depth: factor " + std::to_string(f) +
                                  " does not divide " + x.shape_str());
    }
    Tensor<T> out({B, C * f * f, H / f, W / f});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < H; ++h)
          for (int w = 0; w < W; ++w) {
            const int co = c * f * f + (h % f) * f + (w % f);
            out.at(b, co, h / f, w / f) = x.at(b, c, h, w);
          }
    return out;
  }

  static Tensor<T> depth_to_space_tensor(const Tensor<T>& x, int f) {
    check4(x, "depth_to_space");
    const int B = x.dim(0), Cf = x.dim(1), Hs = x.dim(2), Ws = x.dim(3);
    if (f < 1 || Cf % (f * f) != 0) {
      throw std::invalid_argument("depth_to_space: channels not divisible by factor^2");
    }
    const int C = Cf / (f * f);
    Tensor<T> out({B, C, Hs * f, Ws * f});
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int h = 0; h < Hs * f; ++h)
          for (int w = 0; w < Ws * f; ++w) {
            const int ci = c * f * f + (h % f) * f + (w % f);
            out.at(b, c, h, w) = x.at(b, ci, h / f, w / f);
          }
    return out;
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    std::function<void()> back;
    bool needs_grad = false;
  };

  static void check4(const Tensor<T>& t, const char* op) {
    if (t.ndim() != 4) {
      throw std::invalid_argument(std::string(op) + ": expected 4-d tensor, got " + t.shape_str());
    }
  }

  Value push(Tensor<T> v, bool needs_grad, std::function<void()> back) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    if (needs_grad) n.grad = Tensor<T>::zeros(n.value.shape());
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Value{static_cast<int>(nodes_.size()) - 1};
  }

  template <typename F>
  Value unary(Tensor<T> out, Value a, F&& backfn) {
    const bool ng = recording_ && node(a).needs_grad;
    Value o = push(std::move(out), ng, {});
    if (ng) {
      nodes_[static_cast<std::size_t>(o.id)].back = [this, o, a, backfn]() { backfn(o, a); };
    }
    return o;
  }

  template <typename F>
  Value binary(Tensor<T> out, Value a, Value b, F&& backfn) {
    const bool ng = recording_ && (node(a).needs_grad || node(b).needs_grad);
    Value o = push(std::move(out), ng, {});
    if (ng) {
      nodes_[static_cast<std::size_t>(o.id)].back = [this, o, a, b, backfn]() { backfn(o, a, b); };
    }
    return o;
  }

  Node& node(Value v) { return nodes_[static_cast<std::size_t>(v.id)]; }
  const Tensor<T>& grad_of(Value v) { return node(v).grad; }

  // Applies fn to the parent's gradient buffer iff the parent participates.
  template <typename F>
  void accum(Value parent, F&& fn) {
    Node& n = node(parent);
    if (n.needs_grad) fn(n.grad);
  }

  static void conv2d_forward(const Tensor<T>& x, const Tensor<T>& w, Tensor<T>& out, int stride,
                             int padding) {
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Ho = out.dim(2), Wo = out.dim(3);
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < Cout; ++co)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            T acc{};
            for (int ci = 0; ci < Cin; ++ci) {
              const T* xp = x.data() + ((b * Cin + ci) * H) * W;
              const T* wp = w.data() + ((co * Cin + ci) * kh) * kw;
              for (int ih = 0; ih < kh; ++ih) {
                const int y = oh * stride - padding + ih;
                if (y < 0 || y >= H) continue;
                for (int iw = 0; iw < kw; ++iw) {
                  const int xx = ow * stride - padding + iw;
                  if (xx < 0 || xx >= W) continue;
                  acc += xp[y * W + xx] * wp[ih * kw + iw];
                }
              }
            }
            out.at(b, co, oh, ow) = acc;
          }
  }

  static void conv2d_backward_input(Tensor<T>& gx, const Tensor<T>& w, const Tensor<T>& go,
                                    int stride, int padding) {
    const int B = gx.dim(0), Cin = gx.dim(1), H = gx.dim(2), W = gx.dim(3);
    const int Cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int Ho = go.dim(2), Wo = go.dim(3);
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < Cout; ++co)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            const T g = go.at(b, co, oh, ow);
            for (int ci = 0; ci < Cin; ++ci) {
              T* gxp = gx.data() + ((b * Cin + ci) * H) * W;
              const T* wp = w.data() + ((co * Cin + ci) * kh) * kw;
              for (int ih = 0; ih < kh; ++ih) {
                const int y = oh * stride - padding + ih;
                if (y < 0 || y >= H) continue;
                for (int iw = 0; iw < kw; ++iw) {
                  const int xx = ow * stride - padding + iw;
                  if (xx < 0 || xx >= W) continue;
                  gxp[y * W + xx] += g * wp[ih * kw + iw];
                }
              }
            }
          }
  }

  static void conv2d_backward_kernel(const Tensor<T>& x, Tensor<T>& gw, const Tensor<T>& go,
                                     int stride, int padding) {
    const int B = x.dim(0), Cin = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Cout = gw.dim(0), kh = gw.dim(2), kw = gw.dim(3);
    const int Ho = go.dim(2), Wo = go.dim(3);
    for (int b = 0; b < B; ++b)
      for (int co = 0; co < Cout; ++co)
        for (int oh = 0; oh < Ho; ++oh)
          for (int ow = 0; ow < Wo; ++ow) {
            const T g = go.at(b, co, oh, ow);
            for (int ci = 0; ci < Cin; ++ci) {
              const T* xp = x.data() + ((b * Cin + ci) * H) * W;
              T* gwp = gw.data() + ((co * Cin + ci) * kh) * kw;
              for (int ih = 0; ih < kh; ++ih) {
                const int y = oh * stride - padding + ih;
                if (y < 0 || y >= H) continue;
                for (int iw = 0; iw < kw; ++iw) {
                  const int xx = ow * stride - padding + iw;
                  if (xx < 0 || xx >= W) continue;
                  gwp[ih * kw + iw] += g * xp[y * W + xx];
                }
              }
            }
          }
  }

  bool recording_;
  std::vector<Node> nodes_;
  std::vector<std::pair<int, Parameter<T>*>> bound_params_;
};

}  // namespace stc
