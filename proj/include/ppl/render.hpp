#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "ppl/geometry.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

// H x W scalar field in [0, 1].
struct LinkHeatMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;

  LinkHeatMap() = default;
  LinkHeatMap(int h, int w) : height(h), width(w), values(static_cast<size_t>(h) * w, 0.0) {}
  double& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
  double at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
};

struct RendererConfig {
  double sigma_sq = 5e-4;  // link thickness, normalized-coordinate units^2
  int height = 128;
  int width = 128;

  void validate() const;
};

// Pixel-center convention used everywhere: x = (2*col + 1)/W - 1,
// y = (2*row + 1)/H - 1.
inline double pixel_center_x(int col, int width) {
  return (2.0 * col + 1.0) / width - 1.0;
}
inline double pixel_center_y(int row, int height) {
  return (2.0 * row + 1.0) / height - 1.0;
}

namespace detail {

// Squared distance from point p to the closed segment [a, b], plus the
// clamped projection parameter and the closest point. At the interior
// optimum d(d2)/dt = 0, so gradients may treat t as constant.
template <class S>
struct SegmentDistance {
  S d2;
  S t;
  S cx, cy;
};

template <class S>
inline SegmentDistance<S> segment_distance(S px, S py, S ax, S ay, S bx, S by) {
  const S ux = bx - ax, uy = by - ay;
  const S len2 = ux * ux + uy * uy;
  S t = S(0);
  if (len2 > S(1e-20)) {
    t = ((px - ax) * ux + (py - ay) * uy) / len2;
    t = std::clamp(t, S(0), S(1));
  }
  const S cx = ax + t * ux, cy = ay + t * uy;
  const S dx = px - cx, dy = py - cy;
  return {dx * dx + dy * dy, t, cx, cy};
}

}  // namespace detail

// Gaussian of distance-to-segment: value = exp(-d^2 / sigma_sq).
LinkHeatMap render_link(const Point2& p_i, const Point2& p_j, const RendererConfig& cfg);

struct IndexedLinkMap {
  int i = 0;
  int j = 0;
  LinkHeatMap map;
};

// Renders every upper-triangle pair of the keypoint set.
std::vector<IndexedLinkMap> render_all_links(const KeypointSet& kp, const RendererConfig& cfg);

// Pointwise S(p) = max over pairs of w_ij * S_ij(p). Ties broken by lowest
// (i, j) lexicographic index.
LinkHeatMap combine(const std::vector<IndexedLinkMap>& maps, const TensorT<double>& effective_w);

// Fused forward used by the training op and no-grad inference: renders all
// upper-triangle links and max-composes them in one pass. Contributions with
// exp(-d^2/sigma_sq) < ~1e-12 are treated as zero. If argpair is non-null it
// receives the winning pair index i*N+j per pixel (-1 where S = 0).
template <class S>
void render_combined_forward(const S* kp, int n, const S* w, int height,
                             int width, S sigma_sq, S* out, int32_t* argpair) {
  const int64_t npix = static_cast<int64_t>(height) * width;
  std::fill(out, out + npix, S(0));
  if (argpair) std::fill(argpair, argpair + npix, -1);
  const S cutoff_d2 = S(27.631) * sigma_sq;  // exp(-27.631) ~ 1e-12
  const S reach = static_cast<S>(std::sqrt(static_cast<double>(cutoff_d2)));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const S wij = w[static_cast<size_t>(i) * n + j];
      if (wij <= S(0)) continue;
      const S ax = kp[2 * i], ay = kp[2 * i + 1];
      const S bx = kp[2 * j], by = kp[2 * j + 1];
      const S xlo = std::min(ax, bx) - reach, xhi = std::max(ax, bx) + reach;
      const S ylo = std::min(ay, by) - reach, yhi = std::max(ay, by) + reach;
      // col = ((x + 1) * W - 1) / 2
      int c0 = static_cast<int>(std::ceil(((static_cast<double>(xlo) + 1.0) * width - 1.0) / 2.0));
      int c1 = static_cast<int>(std::floor(((static_cast<double>(xhi) + 1.0) * width - 1.0) / 2.0));
      int r0 = static_cast<int>(std::ceil(((static_cast<double>(ylo) + 1.0) * height - 1.0) / 2.0));
      int r1 = static_cast<int>(std::floor(((static_cast<double>(yhi) + 1.0) * height - 1.0) / 2.0));
      c0 = std::max(c0, 0);
      r0 = std::max(r0, 0);
      c1 = std::min(c1, width - 1);
      r1 = std::min(r1, height - 1);
      for (int r = r0; r <= r1; ++r) {
        const S py = static_cast<S>(pixel_center_y(r, height));
        S* orow = out + static_cast<int64_t>(r) * width;
        int32_t* arow = argpair ? argpair + static_cast<int64_t>(r) * width : nullptr;
        for (int c = c0; c <= c1; ++c) {
          const S px = static_cast<S>(pixel_center_x(c, width));
          const auto sd = detail::segment_distance<S>(px, py, ax, ay, bx, by);
          if (sd.d2 > cutoff_d2) continue;
          const S val = wij * static_cast<S>(std::exp(-static_cast<double>(sd.d2 / sigma_sq)));
          if (val > orow[c]) {
            orow[c] = val;
            if (arow) arow[c] = i * n + j;
          }
        }
      }
    }
  }
}

}  // namespace ppl
