#include "ppl/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace ppl {

bool KeypointSet::within_bounds(double limit) const {
  for (const auto& p : points)
    if (std::abs(p.x) > limit || std::abs(p.y) > limit) return false;
  return true;
}

KeypointSet apply_affine(const KeypointSet& prior, const AffineParams& params) {
  if (prior.size() != params.size())
    throw std::invalid_argument("apply_affine: keypoint/param count mismatch");
  KeypointSet out(prior.size());
  for (int i = 0; i < prior.size(); ++i) {
    const auto& m = params.mats[static_cast<size_t>(i)];
    const Point2& p = prior[i];
    out[i].x = m[0] * p.x + m[1] * p.y + m[2];
    out[i].y = m[3] * p.x + m[4] * p.y + m[5];
  }
  return out;
}

double boundary_loss(const KeypointSet& estimated) {
  double loss = 0.0;
  for (const auto& p : estimated.points) {
    if (std::abs(p.x) > 1.0) loss += std::abs(p.x);
    if (std::abs(p.y) > 1.0) loss += std::abs(p.y);
  }
  return loss;
}

double link_regularization_loss(const KeypointSet& prior,
                                const KeypointSet& estimated,
                                const TensorT<double>& effective_w) {
  const int n = prior.size();
  if (estimated.size() != n)
    throw std::invalid_argument("link_regularization_loss: size mismatch");
  if (effective_w.ndim() != 2 || effective_w.dim(0) != n || effective_w.dim(1) != n)
    throw std::invalid_argument("link_regularization_loss: weight shape mismatch");
  double loss = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double w = effective_w.v[static_cast<size_t>(i) * n + j];
      if (w == 0.0) continue;
      const double lp = std::hypot(prior[i].x - prior[j].x, prior[i].y - prior[j].y);
      const double le = std::hypot(estimated[i].x - estimated[j].x,
                                   estimated[i].y - estimated[j].y);
      loss += w * std::abs(lp - le);
    }
  }
  return loss;
}

double softplus_scalar(double x) {
  if (x > 20.0) return x;
  if (x < -20.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

TensorT<double> effective_weights(const TensorT<double>& raw) {
  if (raw.ndim() != 2 || raw.dim(0) != raw.dim(1))
    throw std::invalid_argument("effective_weights: raw must be square");
  const int n = raw.dim(0);
  TensorT<double> eff({n, n});
  double max_entry = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double sym = 0.5 * (raw.v[static_cast<size_t>(i) * n + j] +
                                raw.v[static_cast<size_t>(j) * n + i]);
      const double s = softplus_scalar(sym);
      eff.v[static_cast<size_t>(i) * n + j] = s;
      if (s > max_entry) max_entry = s;
    }
  }
  if (max_entry < 1e-30)
    throw std::domain_error("effective_weights: degenerate connectivity (all-zero)");
  for (auto& v : eff.v) v /= max_entry;
  return eff;
}

}  // namespace ppl
