#include "ppl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace ppl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Assignment problem with potentials, rows <= cols. Returns row -> col.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n, int m) {
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(m) + 1, 0), way(static_cast<size_t>(m) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<size_t>(m) + 1, 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost[static_cast<size_t>(i0 - 1) * m + (j - 1)] - u[static_cast<size_t>(i0)] -
                           v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<size_t>(j)] > 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

double assignment_cost(const std::vector<double>& cost, int m, const std::vector<int>& row_to_col) {
  double acc = 0.0;
  for (size_t i = 0; i < row_to_col.size(); ++i)
    acc += cost[i * static_cast<size_t>(m) + static_cast<size_t>(row_to_col[i])];
  return acc;
}

// Optimal cost of assigning rows `rows` to a subset of columns `cols`.
double restricted_optimum(const std::vector<double>& cost, int m,
                          const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.empty()) return 0.0;
  std::vector<double> sub(rows.size() * cols.size());
  for (size_t a = 0; a < rows.size(); ++a)
    for (size_t b = 0; b < cols.size(); ++b)
      sub[a * cols.size() + b] = cost[static_cast<size_t>(rows[a]) * m + static_cast<size_t>(cols[b])];
  const auto sol = solve_assignment(sub, static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  double acc = 0.0;
  for (size_t a = 0; a < rows.size(); ++a) acc += sub[a * cols.size() + static_cast<size_t>(sol[a])];
  return acc;
}

// Among all optimal assignments, pick the lexicographically smallest
// (row 0's column, then row 1's, ...). Equal-cost checks use a relative
// tolerance; distances from distinct float inputs tie only at exact
// geometric coincidences.
std::vector<int> lexicographic_refine(const std::vector<double>& cost, int n, int m,
                                      double optimal) {
  std::vector<int> result(static_cast<size_t>(n), -1);
  std::vector<int> rows(static_cast<size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<int> cols(static_cast<size_t>(m));
  std::iota(cols.begin(), cols.end(), 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < n; ++i) {
    rows.erase(rows.begin());
    const double tol = 1e-9 * (1.0 + std::abs(optimal));
    for (size_t b = 0; b < cols.size(); ++b) {
      const int j = cols[b];
      const double with_j = fixed_cost + cost[static_cast<size_t>(i) * m + static_cast<size_t>(j)];
      std::vector<int> rest_cols = cols;
      rest_cols.erase(rest_cols.begin() + static_cast<long>(b));
      const double rest = restricted_optimum(cost, m, rows, rest_cols);
      if (with_j + rest <= optimal + tol) {
        result[static_cast<size_t>(i)] = j;
        fixed_cost = with_j;
        cols = std::move(rest_cols);
        break;
      }
    }
    if (result[static_cast<size_t>(i)] < 0)
      throw std::logic_error("lexicographic_refine: no consistent column found");
  }
  return result;
}

double norm_dist(const Point2& a, const Point2& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

}  // namespace

MatchResult match_keypoints(const KeypointSet& pred, const KeypointSet& gt) {
  const int np = pred.size(), ng = gt.size();
  if (np == 0 || ng == 0)
    throw std::invalid_argument("match_keypoints: empty keypoint set");
  const bool transpose = np > ng;
  const int n = transpose ? ng : np;
  const int m = transpose ? np : ng;
  std::vector<double> cost(static_cast<size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) {
      const Point2& a = transpose ? gt[i] : pred[i];
      const Point2& b = transpose ? pred[j] : gt[j];
      cost[static_cast<size_t>(i) * m + j] = norm_dist(a, b);
    }
  auto sol = solve_assignment(cost, n, m);
  const double optimal = assignment_cost(cost, m, sol);
  sol = lexicographic_refine(cost, n, m, optimal);

  MatchResult r;
  r.assignment.assign(static_cast<size_t>(np), -1);
  r.total_cost = 0.0;
  if (!transpose) {
    for (int i = 0; i < np; ++i) {
      r.assignment[static_cast<size_t>(i)] = sol[static_cast<size_t>(i)];
      r.total_cost += cost[static_cast<size_t>(i) * m + sol[static_cast<size_t>(i)]];
    }
  } else {
    for (int i = 0; i < ng; ++i) {
      r.assignment[static_cast<size_t>(sol[static_cast<size_t>(i)])] = i;
      r.total_cost += cost[static_cast<size_t>(i) * m + sol[static_cast<size_t>(i)]];
    }
  }
  return r;
}

MatchResult match_keypoints_brute_force(const KeypointSet& pred, const KeypointSet& gt) {
  const int np = pred.size(), ng = gt.size();
  if (np == 0 || ng == 0)
    throw std::invalid_argument("match_keypoints_brute_force: empty set");
  if (np > 9 || ng > 9)
    throw std::invalid_argument("match_keypoints_brute_force: too large");
  const bool transpose = np > ng;
  const int n = transpose ? ng : np;
  const int m = transpose ? np : ng;
  std::vector<int> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best;
  double best_cost = kInf;
  do {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      const Point2& a = transpose ? gt[i] : pred[i];
      const Point2& b = transpose ? pred[perm[static_cast<size_t>(i)]] : gt[perm[static_cast<size_t>(i)]];
      acc += norm_dist(a, b);
    }
    if (acc < best_cost) {
      best_cost = acc;
      best.assign(perm.begin(), perm.begin() + n);
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  MatchResult r;
  r.assignment.assign(static_cast<size_t>(np), -1);
  r.total_cost = best_cost;
  if (!transpose) {
    for (int i = 0; i < n; ++i) r.assignment[static_cast<size_t>(i)] = best[static_cast<size_t>(i)];
  } else {
    for (int i = 0; i < n; ++i) r.assignment[static_cast<size_t>(best[static_cast<size_t>(i)])] = i;
  }
  return r;
}

double normalized_l2(const KeypointSet& pred, const KeypointSet& gt, int width, int height) {
  const MatchResult match = match_keypoints(pred, gt);
  const double side = std::sqrt(static_cast<double>(width) * height);
  double acc = 0.0;
  int count = 0;
  for (int i = 0; i < pred.size(); ++i) {
    const int j = match.assignment[static_cast<size_t>(i)];
    if (j < 0) continue;
    const double dx = (pred[i].x - gt[j].x) * 0.5 * width;
    const double dy = (pred[i].y - gt[j].y) * 0.5 * height;
    acc += std::hypot(dx, dy);
    ++count;
  }
  if (count == 0) return 0.0;
  return acc / count / side * 100.0;
}

double normalized_l2(const KeypointSet& pred, const KeypointSet& gt, int resolution) {
  return normalized_l2(pred, gt, resolution, resolution);
}

double summed_l2(const KeypointSet& pred, const KeypointSet& gt) {
  const MatchResult match = match_keypoints(pred, gt);
  constexpr double kRes = 256.0;
  double acc = 0.0;
  for (int i = 0; i < pred.size(); ++i) {
    const int j = match.assignment[static_cast<size_t>(i)];
    if (j < 0) continue;
    const double dx = (pred[i].x - gt[j].x) * 0.5 * kRes;
    const double dy = (pred[i].y - gt[j].y) * 0.5 * kRes;
    acc += std::hypot(dx, dy);
  }
  return acc;
}

ConnectivityStats connectivity_alignment(
    const TensorT<double>& effective_w, const std::vector<MatchResult>& matches,
    const std::vector<std::pair<int, int>>& gt_edges, int n_gt) {
  std::set<std::pair<int, int>> adj;
  for (auto [a, b] : gt_edges) adj.insert({std::min(a, b), std::max(a, b)});
  const int np = effective_w.dim(0);
  ConnectivityStats st;
  double adj_sum = 0.0, non_sum = 0.0;
  for (const auto& m : matches) {
    // Invert pred -> gt into gt -> pred.
    std::vector<int> inv(static_cast<size_t>(n_gt), -1);
    for (size_t i = 0; i < m.assignment.size(); ++i)
      if (m.assignment[i] >= 0) inv[static_cast<size_t>(m.assignment[i])] = static_cast<int>(i);
    for (int a = 0; a < n_gt; ++a) {
      for (int b = a + 1; b < n_gt; ++b) {
        const int pa = inv[static_cast<size_t>(a)], pb = inv[static_cast<size_t>(b)];
        if (pa < 0 || pb < 0) continue;
        const double w = effective_w.v[static_cast<size_t>(pa) * np + pb];
        if (adj.count({a, b})) {
          adj_sum += w;
          st.adjacent_count++;
        } else {
          non_sum += w;
          st.non_adjacent_count++;
        }
      }
    }
  }
  st.adjacent_mean = st.adjacent_count ? adj_sum / st.adjacent_count : 0.0;
  st.non_adjacent_mean = st.non_adjacent_count ? non_sum / st.non_adjacent_count : 0.0;
  return st;
}

}  // namespace ppl
