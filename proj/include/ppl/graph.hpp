#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "ppl/tensor.hpp"

namespace ppl {

// Handle into a GraphT tape. Shared across scalar instantiations.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-mode tape. One graph is built per forward pass; backward() walks
// the tape once in reverse creation order. Single-threaded by design: node
// evaluation order, and therefore floating-point accumulation order, is
// fixed, which makes every training run bit-reproducible.
template <class S>
class GraphT {
 public:
  Var leaf(TensorT<S> t, bool requires_grad = false) {
    Node n;
    n.out = std::move(t);
    n.rg = requires_grad;
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  const TensorT<S>& val(Var x) const { return nodes_.at(x.id).out; }

  // Gradient of the last backward() root w.r.t. x. Zeros if x was never
  // reached by the backward sweep.
  const TensorT<S>& grad(Var x) {
    Node& n = nodes_.at(x.id);
    if (!n.has_grad) {
      n.grad = TensorT<S>::zeros(n.out.shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  bool requires_grad(Var x) const { return nodes_.at(x.id).rg; }

  void backward(Var root) {
    Node& r = nodes_.at(root.id);
    if (r.out.numel() != 1)
      throw std::invalid_argument("backward: root must be scalar");
    grad_acc(root.id).v[0] = S(1);
    for (int id = root.id; id >= 0; --id) {
      Node& n = nodes_[id];
      if (!n.rg || !n.has_grad || !n.bwd) continue;
      n.bwd(*this, id);
    }
  }

  // --- op authoring interface ---

  Var make(TensorT<S> out, std::vector<Var> parents,
           std::function<void(GraphT&, int)> bwd) {
    Node n;
    n.out = std::move(out);
    n.parents.reserve(parents.size());
    for (Var p : parents) {
      n.parents.push_back(p.id);
      if (nodes_.at(p.id).rg) n.rg = true;
    }
    if (n.rg) n.bwd = std::move(bwd);
    nodes_.push_back(std::move(n));
    return Var{static_cast<int>(nodes_.size()) - 1};
  }

  TensorT<S>& grad_acc(int id) {
    Node& n = nodes_.at(id);
    if (!n.has_grad) {
      n.grad = TensorT<S>::zeros(n.out.shape);
      n.has_grad = true;
    }
    return n.grad;
  }

  // Gradient sink for a parent, or nullptr when the parent does not need one.
  TensorT<S>* sink(int parent_id) {
    if (!nodes_.at(parent_id).rg) return nullptr;
    return &grad_acc(parent_id);
  }

  const TensorT<S>& out_of(int id) const { return nodes_.at(id).out; }
  const TensorT<S>& grad_of(int id) const { return nodes_.at(id).grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT<S> out;
    TensorT<S> grad;
    bool has_grad = false;
    bool rg = false;
    std::vector<int> parents;
    std::function<void(GraphT&, int)> bwd;
  };
  std::vector<Node> nodes_;
};

using Graph = GraphT<Real>;

// ---------------------------------------------------------------------------
// Elementwise / reduction ops
// ---------------------------------------------------------------------------

namespace detail {

template <class S, class F, class DF>
Var unary_op(GraphT<S>& g, Var x, F f, DF df) {
  const auto& xv = g.val(x);
  TensorT<S> out(xv.shape);
  for (int64_t i = 0; i < xv.numel(); ++i) out.v[i] = f(xv.v[i]);
  return g.make(std::move(out), {x}, [x, df](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const auto& go = gg.grad_of(self);
    const auto& xv = gg.val(x);
    const auto& ov = gg.out_of(self);
    for (int64_t i = 0; i < xv.numel(); ++i)
      gx->v[i] += go.v[i] * df(xv.v[i], ov.v[i]);
  });
}

}  // namespace detail

template <class S>
Var add(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("add: shape mismatch");
  TensorT<S> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.v[i] = av.v[i] + bv.v[i];
  return g.make(std::move(out), {a, b}, [a, b](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    if (auto* ga = gg.sink(a.id))
      for (int64_t i = 0; i < go.numel(); ++i) ga->v[i] += go.v[i];
    if (auto* gb = gg.sink(b.id))
      for (int64_t i = 0; i < go.numel(); ++i) gb->v[i] += go.v[i];
  });
}

template <class S>
Var sub(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("sub: shape mismatch");
  TensorT<S> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.v[i] = av.v[i] - bv.v[i];
  return g.make(std::move(out), {a, b}, [a, b](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    if (auto* ga = gg.sink(a.id))
      for (int64_t i = 0; i < go.numel(); ++i) ga->v[i] += go.v[i];
    if (auto* gb = gg.sink(b.id))
      for (int64_t i = 0; i < go.numel(); ++i) gb->v[i] -= go.v[i];
  });
}

template <class S>
Var mul(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("mul: shape mismatch");
  TensorT<S> out(av.shape);
  for (int64_t i = 0; i < av.numel(); ++i) out.v[i] = av.v[i] * bv.v[i];
  return g.make(std::move(out), {a, b}, [a, b](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& av = gg.val(a);
    const auto& bv = gg.val(b);
    if (auto* ga = gg.sink(a.id))
      for (int64_t i = 0; i < go.numel(); ++i) ga->v[i] += go.v[i] * bv.v[i];
    if (auto* gb = gg.sink(b.id))
      for (int64_t i = 0; i < go.numel(); ++i) gb->v[i] += go.v[i] * av.v[i];
  });
}

template <class S>
Var scale(GraphT<S>& g, Var x, S c) {
  return detail::unary_op(
      g, x, [c](S v) { return c * v; }, [c](S, S) { return c; });
}

template <class S>
Var relu(GraphT<S>& g, Var x) {
  return detail::unary_op(
      g, x, [](S v) { return v > S(0) ? v : S(0); },
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <class S>
Var tanh_op(GraphT<S>& g, Var x) {
  return detail::unary_op(
      g, x, [](S v) { return std::tanh(v); },
      [](S, S o) { return S(1) - o * o; });
}

template <class S>
Var gelu(GraphT<S>& g, Var x) {
  // Exact erf form; derivative is Phi(x) + x*phi(x).
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  return detail::unary_op(
      g, x,
      [](S v) {
        return static_cast<S>(0.5 * static_cast<double>(v) *
                              (1.0 + std::erf(static_cast<double>(v) * kInvSqrt2)));
      },
      [](S v, S) {
        const double d = static_cast<double>(v);
        const double cdf = 0.5 * (1.0 + std::erf(d * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * d * d);
        return static_cast<S>(cdf + d * pdf);
      });
}

template <class S>
Var softplus(GraphT<S>& g, Var x) {
  return detail::unary_op(
      g, x,
      [](S v) {
        if (v > S(20)) return v;
        if (v < S(-20)) return static_cast<S>(std::exp(static_cast<double>(v)));
        return static_cast<S>(std::log1p(std::exp(static_cast<double>(v))));
      },
      [](S v, S) {
        return static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
      });
}

template <class S>
Var sum_all(GraphT<S>& g, Var x) {
  const auto& xv = g.val(x);
  S acc = S(0);
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv.v[i];
  TensorT<S> out({1});
  out.v[0] = acc;
  return g.make(std::move(out), {x}, [x](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const S go = gg.grad_of(self).v[0];
    for (auto& v : gx->v) v += go;
  });
}

template <class S>
Var mean_all(GraphT<S>& g, Var x) {
  const auto& xv = g.val(x);
  const S inv_n = S(1) / static_cast<S>(xv.numel());
  S acc = S(0);
  for (int64_t i = 0; i < xv.numel(); ++i) acc += xv.v[i];
  TensorT<S> out({1});
  out.v[0] = acc * inv_n;
  return g.make(std::move(out), {x}, [x, inv_n](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const S go = gg.grad_of(self).v[0] * inv_n;
    for (auto& v : gx->v) v += go;
  });
}

// mean_i |a_i - b_i|. Subgradient 0 at a == b.
template <class S>
Var l1_mean(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("l1_mean: shape mismatch");
  const S inv_n = S(1) / static_cast<S>(av.numel());
  S acc = S(0);
  for (int64_t i = 0; i < av.numel(); ++i) acc += std::abs(av.v[i] - bv.v[i]);
  TensorT<S> out({1});
  out.v[0] = acc * inv_n;
  return g.make(std::move(out), {a, b}, [a, b, inv_n](GraphT<S>& gg, int self) {
    const S go = gg.grad_of(self).v[0] * inv_n;
    const auto& av = gg.val(a);
    const auto& bv = gg.val(b);
    auto* ga = gg.sink(a.id);
    auto* gb = gg.sink(b.id);
    for (int64_t i = 0; i < av.numel(); ++i) {
      const S d = av.v[i] - bv.v[i];
      const S s = d > S(0) ? go : (d < S(0) ? -go : S(0));
      if (ga) ga->v[i] += s;
      if (gb) gb->v[i] -= s;
    }
  });
}

// mean over leading dim of per-sample Euclidean norms ||a_i - b_i||_2.
// Exact 0 when a == b; backward guards the norm denominator.
template <class S>
Var l2diff_mean(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (!av.same_shape(bv)) throw std::invalid_argument("l2diff_mean: shape mismatch");
  const int B = av.ndim() > 0 ? av.dim(0) : 1;
  const int64_t per = av.numel() / B;
  std::vector<S> norms(B);
  S acc = S(0);
  for (int bi = 0; bi < B; ++bi) {
    S ss = S(0);
    for (int64_t i = 0; i < per; ++i) {
      const S d = av.v[bi * per + i] - bv.v[bi * per + i];
      ss += d * d;
    }
    norms[bi] = static_cast<S>(std::sqrt(static_cast<double>(ss)));
    acc += norms[bi];
  }
  TensorT<S> out({1});
  out.v[0] = acc / static_cast<S>(B);
  return g.make(std::move(out), {a, b},
                [a, b, B, per, norms](GraphT<S>& gg, int self) {
    const S go = gg.grad_of(self).v[0] / static_cast<S>(B);
    const auto& av = gg.val(a);
    const auto& bv = gg.val(b);
    auto* ga = gg.sink(a.id);
    auto* gb = gg.sink(b.id);
    for (int bi = 0; bi < B; ++bi) {
      const S denom = norms[bi] > S(1e-12) ? norms[bi] : S(1e-12);
      const S c = go / denom;
      if (norms[bi] == S(0)) continue;  // subgradient 0 at coincidence
      for (int64_t i = 0; i < per; ++i) {
        const S d = av.v[bi * per + i] - bv.v[bi * per + i];
        if (ga) ga->v[bi * per + i] += c * d;
        if (gb) gb->v[bi * per + i] -= c * d;
      }
    }
  });
}

// Value copy that blocks gradient flow.
template <class S>
Var detach(GraphT<S>& g, Var x) {
  return g.leaf(g.val(x), false);
}

// Forward takes the values of q; backward routes the incoming gradient
// unchanged onto x (quantization treated as identity).
template <class S>
Var straight_through(GraphT<S>& g, Var x, Var q) {
  const auto& xv = g.val(x);
  const auto& qv = g.val(q);
  if (!xv.same_shape(qv))
    throw std::invalid_argument("straight_through: shape mismatch");
  TensorT<S> out = qv;
  return g.make(std::move(out), {x, q}, [x](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const auto& go = gg.grad_of(self);
    for (int64_t i = 0; i < go.numel(); ++i) gx->v[i] += go.v[i];
  });
}

template <class S>
Var reshape(GraphT<S>& g, Var x, std::vector<int> shape) {
  const auto& xv = g.val(x);
  if (TensorT<S>::count(shape) != xv.numel())
    throw std::invalid_argument("reshape: element count mismatch");
  TensorT<S> out(std::move(shape), xv.v);
  return g.make(std::move(out), {x}, [x](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const auto& go = gg.grad_of(self);
    for (int64_t i = 0; i < go.numel(); ++i) gx->v[i] += go.v[i];
  });
}

// Concatenate along dim 1 of two (B, C, H, W) tensors.
template <class S>
Var concat_channels(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (av.ndim() != 4 || bv.ndim() != 4 || av.dim(0) != bv.dim(0) ||
      av.dim(2) != bv.dim(2) || av.dim(3) != bv.dim(3))
    throw std::invalid_argument("concat_channels: incompatible shapes");
  const int B = av.dim(0), Ca = av.dim(1), Cb = bv.dim(1);
  const int64_t hw = static_cast<int64_t>(av.dim(2)) * av.dim(3);
  TensorT<S> out({B, Ca + Cb, av.dim(2), av.dim(3)});
  for (int bi = 0; bi < B; ++bi) {
    std::copy(av.v.begin() + bi * Ca * hw, av.v.begin() + (bi + 1) * Ca * hw,
              out.v.begin() + bi * (Ca + Cb) * hw);
    std::copy(bv.v.begin() + bi * Cb * hw, bv.v.begin() + (bi + 1) * Cb * hw,
              out.v.begin() + (bi * (Ca + Cb) + Ca) * hw);
  }
  return g.make(std::move(out), {a, b}, [a, b, B, Ca, Cb, hw](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    auto* ga = gg.sink(a.id);
    auto* gb = gg.sink(b.id);
    for (int bi = 0; bi < B; ++bi) {
      if (ga)
        for (int64_t i = 0; i < Ca * hw; ++i)
          ga->v[bi * Ca * hw + i] += go.v[bi * (Ca + Cb) * hw + i];
      if (gb)
        for (int64_t i = 0; i < Cb * hw; ++i)
          gb->v[bi * Cb * hw + i] += go.v[(bi * (Ca + Cb) + Ca) * hw + i];
    }
  });
}

// Weighted sum of scalar losses: sum_i w_i * x_i.
template <class S>
Var weighted_sum(GraphT<S>& g, const std::vector<Var>& xs, const std::vector<S>& ws) {
  if (xs.size() != ws.size()) throw std::invalid_argument("weighted_sum: size mismatch");
  S acc = S(0);
  for (size_t i = 0; i < xs.size(); ++i) acc += ws[i] * g.val(xs[i]).v[0];
  TensorT<S> out({1});
  out.v[0] = acc;
  std::vector<Var> parents = xs;
  std::vector<S> wcopy = ws;
  return g.make(std::move(out), parents, [xs, wcopy](GraphT<S>& gg, int self) {
    const S go = gg.grad_of(self).v[0];
    for (size_t i = 0; i < xs.size(); ++i)
      if (auto* gx = gg.sink(xs[i].id)) gx->v[0] += go * wcopy[i];
  });
}

}  // namespace ppl
