#pragma once

#include <Eigen/Core>

#include "ppl/graph.hpp"

namespace ppl {

namespace detail {

template <class S>
using MatRM = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Map = Eigen::Map<MatRM<S>>;
template <class S>
using CMap = Eigen::Map<const MatRM<S>>;

// Unpacks (C,H,W) into columns of (C*kh*kw, OH*OW) for GEMM convolution.
template <class S>
void im2col(const S* x, int C, int H, int W, int kh, int kw, int stride,
            int pad, int OH, int OW, S* col) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        S* dst = col + ((c * kh + ky) * kw + kx) * (OH * OW);
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) {
            std::fill(dst + oy * OW, dst + (oy + 1) * OW, S(0));
            continue;
          }
          const S* src = x + (c * H + iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[oy * OW + ox] = (ix >= 0 && ix < W) ? src[ix] : S(0);
          }
        }
      }
    }
  }
}

template <class S>
void col2im(const S* col, int C, int H, int W, int kh, int kw, int stride,
            int pad, int OH, int OW, S* x_grad) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < kh; ++ky) {
      for (int kx = 0; kx < kw; ++kx) {
        const S* src = col + ((c * kh + ky) * kw + kx) * (OH * OW);
        for (int oy = 0; oy < OH; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          S* dst = x_grad + (c * H + iy) * W;
          for (int ox = 0; ox < OW; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) dst[ix] += src[oy * OW + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

// x: (..., F), w: (O, F), b: (O) -> (..., O). All leading dims are rows.
template <class S>
Var linear(GraphT<S>& g, Var x, Var w, Var b) {
  const auto& xv = g.val(x);
  const auto& wv = g.val(w);
  const auto& bv = g.val(b);
  const int F = xv.dim(xv.ndim() - 1);
  const int O = wv.dim(0);
  if (wv.dim(1) != F || bv.numel() != O)
    throw std::invalid_argument("linear: shape mismatch");
  const int64_t rows = xv.numel() / F;
  std::vector<int> oshape = xv.shape;
  oshape.back() = O;
  TensorT<S> out(oshape);
  detail::CMap<S> X(xv.data(), rows, F);
  detail::CMap<S> W(wv.data(), O, F);
  detail::Map<S> Y(out.data(), rows, O);
  Y.noalias() = X * W.transpose();
  for (int64_t r = 0; r < rows; ++r)
    for (int o = 0; o < O; ++o) out.v[r * O + o] += bv.v[o];
  return g.make(std::move(out), {x, w, b}, [x, w, b, rows, F, O](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    detail::CMap<S> dY(go.data(), rows, O);
    const auto& xv = gg.val(x);
    const auto& wv = gg.val(w);
    if (auto* gx = gg.sink(x.id)) {
      detail::Map<S> dX(gx->data(), rows, F);
      detail::CMap<S> W(wv.data(), O, F);
      dX.noalias() += dY * W;
    }
    if (auto* gw = gg.sink(w.id)) {
      detail::Map<S> dW(gw->data(), O, F);
      detail::CMap<S> X(xv.data(), rows, F);
      dW.noalias() += dY.transpose() * X;
    }
    if (auto* gb = gg.sink(b.id)) {
      for (int64_t r = 0; r < rows; ++r)
        for (int o = 0; o < O; ++o) gb->v[o] += go.v[r * O + o];
    }
  });
}

// Mixes across the token axis: x (B,T,C), a (U,T), b (U) -> (B,U,C).
// Bias is per output token, broadcast over channels.
template <class S>
Var token_linear(GraphT<S>& g, Var x, Var a, Var b) {
  const auto& xv = g.val(x);
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (xv.ndim() != 3) throw std::invalid_argument("token_linear: x must be (B,T,C)");
  const int B = xv.dim(0), T = xv.dim(1), C = xv.dim(2);
  const int U = av.dim(0);
  if (av.dim(1) != T || bv.numel() != U)
    throw std::invalid_argument("token_linear: shape mismatch");
  TensorT<S> out({B, U, C});
  detail::CMap<S> A(av.data(), U, T);
  for (int bi = 0; bi < B; ++bi) {
    detail::CMap<S> X(xv.data() + static_cast<int64_t>(bi) * T * C, T, C);
    detail::Map<S> Y(out.data() + static_cast<int64_t>(bi) * U * C, U, C);
    Y.noalias() = A * X;
    for (int u = 0; u < U; ++u) Y.row(u).array() += bv.v[u];
  }
  return g.make(std::move(out), {x, a, b}, [x, a, b, B, T, C, U](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& xv = gg.val(x);
    const auto& av = gg.val(a);
    detail::CMap<S> A(av.data(), U, T);
    auto* gx = gg.sink(x.id);
    auto* ga = gg.sink(a.id);
    auto* gb = gg.sink(b.id);
    for (int bi = 0; bi < B; ++bi) {
      detail::CMap<S> dY(go.data() + static_cast<int64_t>(bi) * U * C, U, C);
      detail::CMap<S> X(xv.data() + static_cast<int64_t>(bi) * T * C, T, C);
      if (gx) {
        detail::Map<S> dX(gx->data() + static_cast<int64_t>(bi) * T * C, T, C);
        dX.noalias() += A.transpose() * dY;
      }
      if (ga) {
        detail::Map<S> dA(ga->data(), U, T);
        dA.noalias() += dY * X.transpose();
      }
      if (gb)
        for (int u = 0; u < U; ++u) gb->v[u] += dY.row(u).sum();
    }
  });
}

// LayerNorm over the last dim: x (..., C), gamma (C), beta (C).
template <class S>
Var layer_norm(GraphT<S>& g, Var x, Var gamma, Var beta, S eps = S(1e-5)) {
  const auto& xv = g.val(x);
  const auto& gv = g.val(gamma);
  const auto& bv = g.val(beta);
  const int C = xv.dim(xv.ndim() - 1);
  if (gv.numel() != C || bv.numel() != C)
    throw std::invalid_argument("layer_norm: shape mismatch");
  const int64_t rows = xv.numel() / C;
  TensorT<S> out(xv.shape);
  std::vector<S> xhat(xv.numel());
  std::vector<S> inv_std(rows);
  for (int64_t r = 0; r < rows; ++r) {
    const S* xr = xv.data() + r * C;
    S mu = S(0);
    for (int c = 0; c < C; ++c) mu += xr[c];
    mu /= static_cast<S>(C);
    S var = S(0);
    for (int c = 0; c < C; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<S>(C);
    const S is = S(1) / static_cast<S>(std::sqrt(static_cast<double>(var + eps)));
    inv_std[r] = is;
    for (int c = 0; c < C; ++c) {
      const S xh = (xr[c] - mu) * is;
      xhat[r * C + c] = xh;
      out.v[r * C + c] = gv.v[c] * xh + bv.v[c];
    }
  }
  return g.make(std::move(out), {x, gamma, beta},
                [x, gamma, beta, rows, C, xhat = std::move(xhat),
                 inv_std = std::move(inv_std)](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& gv = gg.val(gamma);
    auto* gx = gg.sink(x.id);
    auto* ggm = gg.sink(gamma.id);
    auto* gbt = gg.sink(beta.id);
    for (int64_t r = 0; r < rows; ++r) {
      const S* gor = go.data() + r * C;
      const S* xhr = xhat.data() + r * C;
      if (ggm)
        for (int c = 0; c < C; ++c) ggm->v[c] += gor[c] * xhr[c];
      if (gbt)
        for (int c = 0; c < C; ++c) gbt->v[c] += gor[c];
      if (gx) {
        S m1 = S(0), m2 = S(0);
        for (int c = 0; c < C; ++c) {
          const S dxh = gor[c] * gv.v[c];
          m1 += dxh;
          m2 += dxh * xhr[c];
        }
        m1 /= static_cast<S>(C);
        m2 /= static_cast<S>(C);
        S* gxr = gx->data() + r * C;
        for (int c = 0; c < C; ++c) {
          const S dxh = gor[c] * gv.v[c];
          gxr[c] += inv_std[r] * (dxh - m1 - xhr[c] * m2);
        }
      }
    }
  });
}

// x: (B,C,H,W), w: (O,C,kh,kw), b: (O). Zero padding.
template <class S>
Var conv2d(GraphT<S>& g, Var x, Var w, Var b, int stride, int pad) {
  const auto& xv = g.val(x);
  const auto& wv = g.val(w);
  const auto& bv = g.val(b);
  if (xv.ndim() != 4 || wv.ndim() != 4)
    throw std::invalid_argument("conv2d: expects 4D tensors");
  const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const int O = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != C || bv.numel() != O)
    throw std::invalid_argument("conv2d: channel mismatch");
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  const int K = C * kh * kw;
  TensorT<S> out({B, O, OH, OW});
  std::vector<S> col(static_cast<size_t>(K) * OH * OW);
  detail::CMap<S> Wm(wv.data(), O, K);
  for (int bi = 0; bi < B; ++bi) {
    detail::im2col(xv.data() + static_cast<int64_t>(bi) * C * H * W, C, H, W,
                   kh, kw, stride, pad, OH, OW, col.data());
    detail::CMap<S> Col(col.data(), K, OH * OW);
    detail::Map<S> Y(out.data() + static_cast<int64_t>(bi) * O * OH * OW, O, OH * OW);
    Y.noalias() = Wm * Col;
    for (int o = 0; o < O; ++o) Y.row(o).array() += bv.v[o];
  }
  return g.make(std::move(out), {x, w, b},
                [x, w, b, B, C, H, W, O, kh, kw, stride, pad, OH, OW,
                 K](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& xv = gg.val(x);
    const auto& wv = gg.val(w);
    auto* gx = gg.sink(x.id);
    auto* gw = gg.sink(w.id);
    auto* gb = gg.sink(b.id);
    detail::CMap<S> Wm(wv.data(), O, K);
    std::vector<S> col(static_cast<size_t>(K) * OH * OW);
    std::vector<S> dcol(static_cast<size_t>(K) * OH * OW);
    for (int bi = 0; bi < B; ++bi) {
      detail::CMap<S> dY(go.data() + static_cast<int64_t>(bi) * O * OH * OW, O, OH * OW);
      if (gw || gx) {
        // im2col is recomputed rather than cached: activations dominate
        // memory at these resolutions.
        detail::im2col(xv.data() + static_cast<int64_t>(bi) * C * H * W, C, H,
                       W, kh, kw, stride, pad, OH, OW, col.data());
      }
      if (gw) {
        detail::Map<S> dW(gw->data(), O, K);
        detail::CMap<S> Col(col.data(), K, OH * OW);
        dW.noalias() += dY * Col.transpose();
      }
      if (gb)
        for (int o = 0; o < O; ++o) gb->v[o] += dY.row(o).sum();
      if (gx) {
        detail::Map<S> dCol(dcol.data(), K, OH * OW);
        dCol.noalias() = Wm.transpose() * dY;
        detail::col2im(dcol.data(), C, H, W, kh, kw, stride, pad, OH, OW,
                       gx->data() + static_cast<int64_t>(bi) * C * H * W);
      }
    }
  });
}

template <class S>
Var upsample2x(GraphT<S>& g, Var x) {
  const auto& xv = g.val(x);
  if (xv.ndim() != 4) throw std::invalid_argument("upsample2x: expects 4D");
  const int B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  TensorT<S> out({B, C, 2 * H, 2 * W});
  for (int64_t p = 0; p < static_cast<int64_t>(B) * C; ++p) {
    const S* src = xv.data() + p * H * W;
    S* dst = out.data() + p * 4 * H * W;
    for (int y = 0; y < H; ++y)
      for (int xg = 0; xg < W; ++xg) {
        const S v = src[y * W + xg];
        dst[(2 * y) * 2 * W + 2 * xg] = v;
        dst[(2 * y) * 2 * W + 2 * xg + 1] = v;
        dst[(2 * y + 1) * 2 * W + 2 * xg] = v;
        dst[(2 * y + 1) * 2 * W + 2 * xg + 1] = v;
      }
  }
  return g.make(std::move(out), {x}, [x, B, C, H, W](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const auto& go = gg.grad_of(self);
    for (int64_t p = 0; p < static_cast<int64_t>(B) * C; ++p) {
      const S* src = go.data() + p * 4 * H * W;
      S* dst = gx->data() + p * H * W;
      for (int y = 0; y < H; ++y)
        for (int xg = 0; xg < W; ++xg)
          dst[y * W + xg] += src[(2 * y) * 2 * W + 2 * xg] +
                             src[(2 * y) * 2 * W + 2 * xg + 1] +
                             src[(2 * y + 1) * 2 * W + 2 * xg] +
                             src[(2 * y + 1) * 2 * W + 2 * xg + 1];
    }
  });
}

// Global average pool (B,C,H,W) -> (B,C).
template <class S>
Var global_avg_pool(GraphT<S>& g, Var x) {
  const auto& xv = g.val(x);
  if (xv.ndim() != 4) throw std::invalid_argument("global_avg_pool: expects 4D");
  const int B = xv.dim(0), C = xv.dim(1);
  const int64_t hw = static_cast<int64_t>(xv.dim(2)) * xv.dim(3);
  const S inv = S(1) / static_cast<S>(hw);
  TensorT<S> out({B, C});
  for (int64_t p = 0; p < static_cast<int64_t>(B) * C; ++p) {
    S acc = S(0);
    const S* src = xv.data() + p * hw;
    for (int64_t i = 0; i < hw; ++i) acc += src[i];
    out.v[p] = acc * inv;
  }
  return g.make(std::move(out), {x}, [x, B, C, hw, inv](GraphT<S>& gg, int self) {
    auto* gx = gg.sink(x.id);
    if (!gx) return;
    const auto& go = gg.grad_of(self);
    for (int64_t p = 0; p < static_cast<int64_t>(B) * C; ++p) {
      const S gv = go.v[p] * inv;
      S* dst = gx->data() + p * hw;
      for (int64_t i = 0; i < hw; ++i) dst[i] += gv;
    }
  });
}

// Concatenate two (B, F) feature vectors along dim 1.
template <class S>
Var concat_features(GraphT<S>& g, Var a, Var b) {
  const auto& av = g.val(a);
  const auto& bv = g.val(b);
  if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(0) != bv.dim(0))
    throw std::invalid_argument("concat_features: incompatible shapes");
  const int B = av.dim(0), Fa = av.dim(1), Fb = bv.dim(1);
  TensorT<S> out({B, Fa + Fb});
  for (int bi = 0; bi < B; ++bi) {
    std::copy(av.v.begin() + bi * Fa, av.v.begin() + (bi + 1) * Fa,
              out.v.begin() + bi * (Fa + Fb));
    std::copy(bv.v.begin() + bi * Fb, bv.v.begin() + (bi + 1) * Fb,
              out.v.begin() + bi * (Fa + Fb) + Fa);
  }
  return g.make(std::move(out), {a, b}, [a, b, B, Fa, Fb](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    auto* ga = gg.sink(a.id);
    auto* gb = gg.sink(b.id);
    for (int bi = 0; bi < B; ++bi) {
      if (ga)
        for (int i = 0; i < Fa; ++i)
          ga->v[bi * Fa + i] += go.v[bi * (Fa + Fb) + i];
      if (gb)
        for (int i = 0; i < Fb; ++i)
          gb->v[bi * Fb + i] += go.v[bi * (Fa + Fb) + Fa + i];
    }
  });
}

}  // namespace ppl
