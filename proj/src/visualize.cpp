#include "ppl/visualize.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ppl/draw.hpp"

namespace ppl {

namespace {

const draw::Rgb kSeriesPalette[] = {
    {0.90, 0.30, 0.30}, {0.25, 0.55, 0.95}, {0.30, 0.75, 0.35}, {0.85, 0.60, 0.20},
    {0.60, 0.40, 0.85}, {0.20, 0.75, 0.75}, {0.80, 0.35, 0.65}, {0.55, 0.55, 0.25},
};

void draw_pose(ImageU8& img, const KeypointSet& kp, const TensorT<double>& w,
               double min_weight) {
  const int n = kp.size();
  if (w.ndim() != 2 || w.dim(0) != n || w.dim(1) != n)
    throw std::invalid_argument("draw_pose: weight shape mismatch");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double wij = w.v[static_cast<size_t>(i) * n + j];
      if (wij < min_weight) continue;
      draw::capsule(img, kp[i], kp[j], 0.012, {0.35, 0.95, 0.55}, wij);
    }
  for (int i = 0; i < n; ++i)
    draw::disc(img, kp[i], 0.018, {0.95, 0.25, 0.25});
}

}  // namespace

ImageU8 render_prior_image(const KeypointSet& prior, const TensorT<double>& effective_w,
                           int resolution, double min_weight) {
  ImageU8 img(resolution, resolution);
  std::fill(img.rgb.begin(), img.rgb.end(), static_cast<uint8_t>(24));
  draw_pose(img, prior, effective_w, min_weight);
  return img;
}

ImageU8 render_pose_overlay(const ImageU8& frame, const KeypointSet& keypoints,
                            const TensorT<double>& effective_w, double min_weight) {
  ImageU8 img = frame;
  draw_pose(img, keypoints, effective_w, min_weight);
  return img;
}

ImageU8 render_line_chart(const std::vector<std::vector<double>>& series_y,
                          const std::vector<double>& xs, int width, int height) {
  if (series_y.empty() || xs.size() < 2)
    throw std::invalid_argument("render_line_chart: need >= 1 series and >= 2 x values");
  for (const auto& s : series_y)
    if (s.size() != xs.size())
      throw std::invalid_argument("render_line_chart: series length mismatch");

  double ymin = series_y[0][0], ymax = series_y[0][0];
  for (const auto& s : series_y)
    for (double v : s) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (ymax - ymin < 1e-12) {
    ymax += 1.0;
    ymin -= 1.0;
  }
  const double xmin = xs.front(), xmax = xs.back();

  ImageU8 img(height, width);
  std::fill(img.rgb.begin(), img.rgb.end(), static_cast<uint8_t>(250));
  const double margin = 0.12;
  auto to_norm_x = [&](double x) {
    return -1.0 + 2.0 * (margin + (1 - 2 * margin) * (x - xmin) / (xmax - xmin));
  };
  auto to_norm_y = [&](double y) {
    // y grows upward on the chart.
    return 1.0 - 2.0 * (margin + (1 - 2 * margin) * (y - ymin) / (ymax - ymin));
  };
  // Axes.
  const draw::Rgb axis{0.2, 0.2, 0.2};
  draw::capsule(img, {to_norm_x(xmin), to_norm_y(ymin)}, {to_norm_x(xmax), to_norm_y(ymin)},
                0.006, axis);
  draw::capsule(img, {to_norm_x(xmin), to_norm_y(ymin)}, {to_norm_x(xmin), to_norm_y(ymax)},
                0.006, axis);
  // Ticks at every x sample.
  for (double x : xs)
    draw::capsule(img, {to_norm_x(x), to_norm_y(ymin) + 0.015},
                  {to_norm_x(x), to_norm_y(ymin) - 0.015}, 0.005, axis);
  for (size_t s = 0; s < series_y.size(); ++s) {
    const auto& color = kSeriesPalette[s % std::size(kSeriesPalette)];
    for (size_t i = 0; i + 1 < xs.size(); ++i) {
      draw::capsule(img, {to_norm_x(xs[i]), to_norm_y(series_y[s][i])},
                    {to_norm_x(xs[i + 1]), to_norm_y(series_y[s][i + 1])}, 0.01, color);
    }
    // Legend swatch along the top.
    const double lx = -0.9 + 0.15 * static_cast<double>(s);
    draw::capsule(img, {lx, -0.93}, {lx + 0.08, -0.93}, 0.02, color);
  }
  return img;
}

}  // namespace ppl
