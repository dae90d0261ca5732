#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "ppl/tensor.hpp"

namespace ppl {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Ordered keypoints in normalized image coordinates. A valid prior lies in
// [-1,1]^2; per-frame estimates may transiently leave it (boundary loss).
struct KeypointSet {
  std::vector<Point2> points;

  KeypointSet() = default;
  explicit KeypointSet(int n) : points(static_cast<size_t>(n)) {}

  int size() const { return static_cast<int>(points.size()); }
  Point2& operator[](int i) { return points[static_cast<size_t>(i)]; }
  const Point2& operator[](int i) const { return points[static_cast<size_t>(i)]; }

  bool within_bounds(double limit = 1.0) const;

  // (N, 2) tensor in (x, y) order.
  template <class S>
  TensorT<S> to_tensor() const {
    TensorT<S> t({size(), 2});
    for (int i = 0; i < size(); ++i) {
      t.v[2 * i] = static_cast<S>(points[i].x);
      t.v[2 * i + 1] = static_cast<S>(points[i].y);
    }
    return t;
  }
  template <class S>
  static KeypointSet from_tensor(const TensorT<S>& t, int row = 0) {
    // Accepts (N,2) or (B,N,2) with a row selector.
    const int n = t.ndim() == 3 ? t.dim(1) : t.dim(0);
    KeypointSet ks(n);
    const int64_t off = t.ndim() == 3 ? static_cast<int64_t>(row) * n * 2 : 0;
    for (int i = 0; i < n; ++i) {
      ks[i].x = static_cast<double>(t.v[off + 2 * i]);
      ks[i].y = static_cast<double>(t.v[off + 2 * i + 1]);
    }
    return ks;
  }
};

// Per-keypoint homogeneous affine transforms. Bottom row is implicit
// (0, 0, 1); rows store (a, b, tx, c, d, ty).
struct AffineParams {
  // One 6-vector per keypoint: x' = a x + b y + tx, y' = c x + d y + ty.
  std::vector<std::array<double, 6>> mats;

  AffineParams() = default;
  explicit AffineParams(int n)
      : mats(static_cast<size_t>(n), {1, 0, 0, 0, 1, 0}) {}
  int size() const { return static_cast<int>(mats.size()); }

  static AffineParams identity(int n) { return AffineParams(n); }
  static AffineParams translation(int n, double tx, double ty) {
    AffineParams p(n);
    for (auto& m : p.mats) {
      m[2] = tx;
      m[5] = ty;
    }
    return p;
  }
};

// Applies each transform to its keypoint: [P'_i, 1]^T = Theta_i [P_i, 1]^T.
KeypointSet apply_affine(const KeypointSet& prior, const AffineParams& params);

// Sum over keypoints and coordinates of |c| where |c| > 1, else 0.
double boundary_loss(const KeypointSet& estimated);

// Sum over all ordered pairs (i, j) of w_ij * | ||P_i-P_j|| - ||P'_i-P'_j|| |.
double link_regularization_loss(const KeypointSet& prior,
                                const KeypointSet& estimated,
                                const TensorT<double>& effective_w);

// Symmetrize, softplus, zero the diagonal, normalize so max entry is 1.
// Throws std::domain_error if every off-diagonal entry maps to ~0.
TensorT<double> effective_weights(const TensorT<double>& raw);

// Learnable N x N link weights. The raw matrix is the parameter; reads go
// through effective_weights().
struct ConnectivityPrior {
  Tensor raw;  // (N, N)

  explicit ConnectivityPrior(int n) : raw({n, n}) {}
  int size() const { return raw.dim(0); }
};

double softplus_scalar(double x);

}  // namespace ppl
