#include "ppl/render.hpp"

#include <algorithm>
#include <stdexcept>

namespace ppl {

void RendererConfig::validate() const {
  if (sigma_sq <= 0.0)
    throw std::invalid_argument("RendererConfig: sigma_sq must be positive");
  if (height <= 0 || width <= 0)
    throw std::invalid_argument("RendererConfig: resolution must be positive");
}

LinkHeatMap render_link(const Point2& p_i, const Point2& p_j, const RendererConfig& cfg) {
  cfg.validate();
  // Canonical endpoint order makes the map bit-exact under argument swap.
  const bool flip = (p_j.x < p_i.x) || (p_j.x == p_i.x && p_j.y < p_i.y);
  const Point2& a = flip ? p_j : p_i;
  const Point2& b = flip ? p_i : p_j;
  LinkHeatMap map(cfg.height, cfg.width);
  for (int r = 0; r < cfg.height; ++r) {
    const double py = pixel_center_y(r, cfg.height);
    for (int c = 0; c < cfg.width; ++c) {
      const double px = pixel_center_x(c, cfg.width);
      const auto sd = detail::segment_distance<double>(px, py, a.x, a.y, b.x, b.y);
      map.at(r, c) = std::exp(-sd.d2 / cfg.sigma_sq);
    }
  }
  return map;
}

std::vector<IndexedLinkMap> render_all_links(const KeypointSet& kp, const RendererConfig& cfg) {
  std::vector<IndexedLinkMap> maps;
  maps.reserve(static_cast<size_t>(kp.size()) * (kp.size() - 1) / 2);
  for (int i = 0; i < kp.size(); ++i)
    for (int j = i + 1; j < kp.size(); ++j)
      maps.push_back({i, j, render_link(kp[i], kp[j], cfg)});
  return maps;
}

LinkHeatMap combine(const std::vector<IndexedLinkMap>& maps, const TensorT<double>& effective_w) {
  if (maps.empty()) throw std::invalid_argument("combine: no maps");
  const int n = effective_w.dim(0);
  LinkHeatMap out(maps[0].map.height, maps[0].map.width);
  // Scan in lexicographic pair order so ties keep the lowest (i, j).
  std::vector<size_t> order(maps.size());
  for (size_t k = 0; k < maps.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return std::make_pair(maps[a].i, maps[a].j) < std::make_pair(maps[b].i, maps[b].j);
  });
  for (size_t k : order) {
    const auto& m = maps[k];
    if (m.map.height != out.height || m.map.width != out.width)
      throw std::invalid_argument("combine: map resolution mismatch");
    const double w = effective_w.v[static_cast<size_t>(m.i) * n + m.j];
    for (size_t p = 0; p < out.values.size(); ++p) {
      const double v = w * m.map.values[p];
      if (v > out.values[p]) out.values[p] = v;
    }
  }
  return out;
}

}  // namespace ppl
