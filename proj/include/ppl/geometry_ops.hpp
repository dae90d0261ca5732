#pragma once

#include "ppl/graph.hpp"

namespace ppl {

// prior: (N,2), theta: (B,N,6) rows (a,b,tx,c,d,ty) -> (B,N,2).
template <class S>
Var affine_apply(GraphT<S>& g, Var prior, Var theta) {
  const auto& pv = g.val(prior);
  const auto& tv = g.val(theta);
  if (pv.ndim() != 2 || pv.dim(1) != 2)
    throw std::invalid_argument("affine_apply: prior must be (N,2)");
  if (tv.ndim() != 3 || tv.dim(2) != 6 || tv.dim(1) != pv.dim(0))
    throw std::invalid_argument("affine_apply: theta must be (B,N,6) matching prior");
  const int B = tv.dim(0), N = tv.dim(1);
  TensorT<S> out({B, N, 2});
  for (int bi = 0; bi < B; ++bi) {
    for (int i = 0; i < N; ++i) {
      const S* m = tv.data() + (static_cast<int64_t>(bi) * N + i) * 6;
      const S px = pv.v[2 * i], py = pv.v[2 * i + 1];
      out.v[(static_cast<int64_t>(bi) * N + i) * 2] = m[0] * px + m[1] * py + m[2];
      out.v[(static_cast<int64_t>(bi) * N + i) * 2 + 1] = m[3] * px + m[4] * py + m[5];
    }
  }
  return g.make(std::move(out), {prior, theta}, [prior, theta, B, N](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& pv = gg.val(prior);
    const auto& tv = gg.val(theta);
    auto* gp = gg.sink(prior.id);
    auto* gt = gg.sink(theta.id);
    for (int bi = 0; bi < B; ++bi) {
      for (int i = 0; i < N; ++i) {
        const int64_t o = (static_cast<int64_t>(bi) * N + i);
        const S gx = go.v[o * 2], gy = go.v[o * 2 + 1];
        const S px = pv.v[2 * i], py = pv.v[2 * i + 1];
        const S* m = tv.data() + o * 6;
        if (gt) {
          S* d = gt->data() + o * 6;
          d[0] += gx * px;
          d[1] += gx * py;
          d[2] += gx;
          d[3] += gy * px;
          d[4] += gy * py;
          d[5] += gy;
        }
        if (gp) {
          gp->v[2 * i] += gx * m[0] + gy * m[3];
          gp->v[2 * i + 1] += gx * m[1] + gy * m[4];
        }
      }
    }
  });
}

// kp: (B,N,2) -> scalar. Per-sample sum of |c| over coordinates with |c|>1,
// averaged over the batch. Subgradient 0 at the |c|=1 kink.
template <class S>
Var boundary_loss_op(GraphT<S>& g, Var kp) {
  const auto& kv = g.val(kp);
  if (kv.ndim() != 3 || kv.dim(2) != 2)
    throw std::invalid_argument("boundary_loss_op: expects (B,N,2)");
  const int B = kv.dim(0);
  const int64_t per = kv.numel() / B;
  S acc = S(0);
  for (int64_t i = 0; i < kv.numel(); ++i) {
    const S a = std::abs(kv.v[i]);
    if (a > S(1)) acc += a;
  }
  TensorT<S> out({1});
  out.v[0] = acc / static_cast<S>(B);
  return g.make(std::move(out), {kp}, [kp, B, per](GraphT<S>& gg, int self) {
    auto* gk = gg.sink(kp.id);
    if (!gk) return;
    const S go = gg.grad_of(self).v[0] / static_cast<S>(B);
    const auto& kv = gg.val(kp);
    for (int64_t i = 0; i < kv.numel(); ++i) {
      if (std::abs(kv.v[i]) > S(1)) gk->v[i] += kv.v[i] > S(0) ? go : -go;
    }
  });
}

// prior: (N,2), est: (B,N,2), w: (N,N) effective weights -> scalar.
// Per-sample sum over ordered pairs of w_ij * | l(P_i,P_j) - l(P'_i,P'_j) |,
// averaged over the batch.
template <class S>
Var link_reg_loss_op(GraphT<S>& g, Var prior, Var est, Var w) {
  const auto& pv = g.val(prior);
  const auto& ev = g.val(est);
  const auto& wv = g.val(w);
  const int N = pv.dim(0);
  if (ev.ndim() != 3 || ev.dim(1) != N || ev.dim(2) != 2)
    throw std::invalid_argument("link_reg_loss_op: est must be (B,N,2)");
  if (wv.ndim() != 2 || wv.dim(0) != N || wv.dim(1) != N)
    throw std::invalid_argument("link_reg_loss_op: w must be (N,N)");
  const int B = ev.dim(0);
  auto dist = [](S ax, S ay, S bx, S by) {
    const S dx = ax - bx, dy = ay - by;
    return static_cast<S>(std::sqrt(static_cast<double>(dx * dx + dy * dy)));
  };
  // Prior pair lengths are shared across the batch.
  std::vector<S> lp(static_cast<size_t>(N) * N, S(0));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j)
      lp[static_cast<size_t>(i) * N + j] =
          dist(pv.v[2 * i], pv.v[2 * i + 1], pv.v[2 * j], pv.v[2 * j + 1]);
  S acc = S(0);
  for (int bi = 0; bi < B; ++bi) {
    const S* e = ev.data() + static_cast<int64_t>(bi) * N * 2;
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        const S wij = wv.v[static_cast<size_t>(i) * N + j];
        if (wij == S(0)) continue;
        const S le = dist(e[2 * i], e[2 * i + 1], e[2 * j], e[2 * j + 1]);
        acc += wij * std::abs(lp[static_cast<size_t>(i) * N + j] - le);
      }
  }
  TensorT<S> out({1});
  out.v[0] = acc / static_cast<S>(B);
  return g.make(std::move(out), {prior, est, w},
                [prior, est, w, B, N, lp = std::move(lp), dist](GraphT<S>& gg, int self) {
    const S go = gg.grad_of(self).v[0] / static_cast<S>(B);
    const auto& pv = gg.val(prior);
    const auto& ev = gg.val(est);
    const auto& wv = gg.val(w);
    auto* gp = gg.sink(prior.id);
    auto* ge = gg.sink(est.id);
    auto* gw = gg.sink(w.id);
    for (int bi = 0; bi < B; ++bi) {
      const S* e = ev.data() + static_cast<int64_t>(bi) * N * 2;
      S* ged = ge ? ge->data() + static_cast<int64_t>(bi) * N * 2 : nullptr;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          const S wij = wv.v[static_cast<size_t>(i) * N + j];
          const S lpv = lp[static_cast<size_t>(i) * N + j];
          const S le = dist(e[2 * i], e[2 * i + 1], e[2 * j], e[2 * j + 1]);
          const S diff = lpv - le;
          if (gw) gw->v[static_cast<size_t>(i) * N + j] += go * std::abs(diff);
          if (wij == S(0)) continue;
          const S sgn = diff > S(0) ? S(1) : (diff < S(0) ? S(-1) : S(0));
          if (ged && le > S(1e-12)) {
            // d le / d P'_i = (P'_i - P'_j) / le, and loss term is -sgn * le.
            const S c = -go * wij * sgn / le;
            const S dx = e[2 * i] - e[2 * j], dy = e[2 * i + 1] - e[2 * j + 1];
            ged[2 * i] += c * dx;
            ged[2 * i + 1] += c * dy;
            ged[2 * j] -= c * dx;
            ged[2 * j + 1] -= c * dy;
          }
          if (gp && lpv > S(1e-12)) {
            const S c = go * wij * sgn / lpv;
            const S dx = pv.v[2 * i] - pv.v[2 * j], dy = pv.v[2 * i + 1] - pv.v[2 * j + 1];
            gp->v[2 * i] += c * dx;
            gp->v[2 * i + 1] += c * dy;
            gp->v[2 * j] -= c * dx;
            gp->v[2 * j + 1] -= c * dy;
          }
        }
    }
  });
}

// raw (N,N) -> effective weights (N,N): symmetrize, softplus, zero diagonal,
// divide by the max off-diagonal entry. Gradient treats the argmax entry as
// the normalizer (quotient rule through the max).
template <class S>
Var effective_weights_op(GraphT<S>& g, Var raw) {
  const auto& rv = g.val(raw);
  if (rv.ndim() != 2 || rv.dim(0) != rv.dim(1))
    throw std::invalid_argument("effective_weights_op: raw must be square");
  const int N = rv.dim(0);
  TensorT<S> sp({N, N});
  S max_entry = S(0);
  int arg = -1;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      const S sym = S(0.5) * (rv.v[static_cast<size_t>(i) * N + j] +
                              rv.v[static_cast<size_t>(j) * N + i]);
      S s;
      if (sym > S(20))
        s = sym;
      else if (sym < S(-20))
        s = static_cast<S>(std::exp(static_cast<double>(sym)));
      else
        s = static_cast<S>(std::log1p(std::exp(static_cast<double>(sym))));
      sp.v[static_cast<size_t>(i) * N + j] = s;
      if (s > max_entry) {
        max_entry = s;
        arg = i * N + j;
      }
    }
  if (max_entry < S(1e-30))
    throw std::domain_error("effective_weights_op: degenerate connectivity");
  TensorT<S> out({N, N});
  for (int64_t i = 0; i < out.numel(); ++i) out.v[i] = sp.v[i] / max_entry;
  return g.make(std::move(out), {raw},
                [raw, N, sp = std::move(sp), max_entry, arg](GraphT<S>& gg, int self) {
    auto* gr = gg.sink(raw.id);
    if (!gr) return;
    const auto& go = gg.grad_of(self);
    const auto& rv = gg.val(raw);
    // d out_kl / d s_kl = 1/M; d out_kl / d s_arg = -s_kl / M^2.
    std::vector<S> gs(static_cast<size_t>(N) * N, S(0));
    S gmax = S(0);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        if (i == j) continue;
        const int64_t idx = static_cast<int64_t>(i) * N + j;
        gs[idx] += go.v[idx] / max_entry;
        gmax -= go.v[idx] * sp.v[idx] / (max_entry * max_entry);
      }
    gs[arg] += gmax;
    // Chain through softplus and the symmetrization.
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j) {
        if (i == j) continue;
        const int64_t idx = static_cast<int64_t>(i) * N + j;
        if (gs[idx] == S(0)) continue;
        const S sym = S(0.5) * (rv.v[static_cast<size_t>(i) * N + j] +
                                rv.v[static_cast<size_t>(j) * N + i]);
        const S sig = static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(sym))));
        const S gsym = gs[idx] * sig;
        gr->v[static_cast<size_t>(i) * N + j] += S(0.5) * gsym;
        gr->v[static_cast<size_t>(j) * N + i] += S(0.5) * gsym;
      }
  });
}

}  // namespace ppl
