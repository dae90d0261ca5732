#pragma once

#include "ppl/graph.hpp"
#include "ppl/render.hpp"

namespace ppl {

// kp: (B,N,2), w: (N,N) -> (B,1,H,W). Gradient flows only through the
// argmax pair at each pixel (envelope theorem handles the clamped
// projection parameter, so t is treated as constant in the backward pass).
template <class S>
Var render_combine_op(GraphT<S>& g, Var kp, Var w, int height, int width, S sigma_sq) {
  const auto& kv = g.val(kp);
  const auto& wv = g.val(w);
  if (kv.ndim() != 3 || kv.dim(2) != 2)
    throw std::invalid_argument("render_combine_op: kp must be (B,N,2)");
  const int B = kv.dim(0), N = kv.dim(1);
  if (wv.ndim() != 2 || wv.dim(0) != N || wv.dim(1) != N)
    throw std::invalid_argument("render_combine_op: w must be (N,N)");
  if (sigma_sq <= S(0))
    throw std::invalid_argument("render_combine_op: sigma_sq must be positive");
  const int64_t npix = static_cast<int64_t>(height) * width;
  TensorT<S> out({B, 1, height, width});
  std::vector<int32_t> argpair(static_cast<size_t>(B) * npix);
  for (int bi = 0; bi < B; ++bi) {
    render_combined_forward<S>(kv.data() + static_cast<int64_t>(bi) * N * 2, N,
                               wv.data(), height, width, sigma_sq,
                               out.data() + bi * npix,
                               argpair.data() + bi * npix);
  }
  return g.make(std::move(out), {kp, w},
                [kp, w, B, N, height, width, sigma_sq,
                 argpair = std::move(argpair), npix](GraphT<S>& gg, int self) {
    const auto& go = gg.grad_of(self);
    const auto& ov = gg.out_of(self);
    const auto& kv = gg.val(kp);
    const auto& wv = gg.val(w);
    auto* gk = gg.sink(kp.id);
    auto* gw = gg.sink(w.id);
    if (!gk && !gw) return;
    for (int bi = 0; bi < B; ++bi) {
      const S* kpb = kv.data() + static_cast<int64_t>(bi) * N * 2;
      S* gkb = gk ? gk->data() + static_cast<int64_t>(bi) * N * 2 : nullptr;
      for (int r = 0; r < height; ++r) {
        const S py = static_cast<S>(pixel_center_y(r, height));
        for (int c = 0; c < width; ++c) {
          const int64_t pix = bi * npix + static_cast<int64_t>(r) * width + c;
          const int32_t ap = argpair[pix];
          if (ap < 0) continue;
          const S gout = go.v[pix];
          if (gout == S(0)) continue;
          const int i = ap / N, j = ap % N;
          const S px = static_cast<S>(pixel_center_x(c, width));
          const auto sd = detail::segment_distance<S>(
              px, py, kpb[2 * i], kpb[2 * i + 1], kpb[2 * j], kpb[2 * j + 1]);
          const S val = ov.v[pix];
          if (gw) {
            const S e = static_cast<S>(std::exp(-static_cast<double>(sd.d2 / sigma_sq)));
            gw->v[static_cast<size_t>(i) * N + j] += gout * e;
          }
          if (gkb) {
            // d val / d d2 = -val / sigma_sq; d d2/da = -2(1-t)(p-c), d d2/db = -2t(p-c).
            const S dv = -gout * val / sigma_sq;
            const S dx = px - sd.cx, dy = py - sd.cy;
            const S ca = S(-2) * (S(1) - sd.t) * dv;
            const S cb = S(-2) * sd.t * dv;
            gkb[2 * i] += ca * dx;
            gkb[2 * i + 1] += ca * dy;
            gkb[2 * j] += cb * dx;
            gkb[2 * j + 1] += cb * dy;
          }
        }
      }
    }
  });
}

}  // namespace ppl
