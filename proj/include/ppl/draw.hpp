#pragma once

#include <algorithm>
#include <cmath>

#include "ppl/imageio.hpp"
#include "ppl/render.hpp"

namespace ppl::draw {

struct Rgb {
  double r = 0, g = 0, b = 0;
};

inline void blend_px(ImageU8& img, int row, int col, const Rgb& color, double alpha) {
  uint8_t* p = img.px(row, col);
  const double cols[3] = {color.r, color.g, color.b};
  for (int ch = 0; ch < 3; ++ch) {
    const double base = p[ch] / 255.0;
    p[ch] = static_cast<uint8_t>(
        std::lround(std::clamp(base + alpha * (cols[ch] - base), 0.0, 1.0) * 255.0));
  }
}

// Anti-aliased capsule between two normalized-coordinate points; coverage
// ramps over one pixel at the boundary. alpha_scale < 1 draws translucent.
inline void capsule(ImageU8& img, const Point2& a, const Point2& b, double thickness,
                    const Rgb& color, double alpha_scale = 1.0) {
  const int H = img.height, W = img.width;
  const double aa = 2.0 / H;
  const double half = thickness * 0.5;
  const double reach = half + 2.0 * aa;
  const double xlo = std::min(a.x, b.x) - reach, xhi = std::max(a.x, b.x) + reach;
  const double ylo = std::min(a.y, b.y) - reach, yhi = std::max(a.y, b.y) + reach;
  const int c0 = std::max(0, static_cast<int>(std::floor(((xlo + 1.0) * W - 1.0) / 2.0)));
  const int c1 = std::min(W - 1, static_cast<int>(std::ceil(((xhi + 1.0) * W - 1.0) / 2.0)));
  const int r0 = std::max(0, static_cast<int>(std::floor(((ylo + 1.0) * H - 1.0) / 2.0)));
  const int r1 = std::min(H - 1, static_cast<int>(std::ceil(((yhi + 1.0) * H - 1.0) / 2.0)));
  for (int r = r0; r <= r1; ++r) {
    const double py = pixel_center_y(r, H);
    for (int c = c0; c <= c1; ++c) {
      const double px = pixel_center_x(c, W);
      const auto sd = detail::segment_distance<double>(px, py, a.x, a.y, b.x, b.y);
      const double d = std::sqrt(sd.d2);
      const double alpha = std::clamp(0.5 - (d - half) / aa, 0.0, 1.0) * alpha_scale;
      if (alpha > 0.0) blend_px(img, r, c, color, alpha);
    }
  }
}

inline void disc(ImageU8& img, const Point2& center, double radius, const Rgb& color,
                 double alpha_scale = 1.0) {
  capsule(img, center, center, radius * 2.0, color, alpha_scale);
}

}  // namespace ppl::draw
