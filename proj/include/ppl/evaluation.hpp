#pragma once

#include <utility>
#include <vector>

#include "ppl/geometry.hpp"

namespace ppl {

// One-to-one assignment from predicted to ground-truth keypoints covering
// min(N_p, N_g) pairs; assignment[i] is the matched gt index or -1.
// total_cost is the summed Euclidean distance in normalized coordinates and
// is minimal over all one-to-one assignments; among equal-cost optima the
// lexicographically smallest assignment is returned.
struct MatchResult {
  std::vector<int> assignment;
  double total_cost = 0.0;
};

MatchResult match_keypoints(const KeypointSet& pred, const KeypointSet& gt);

// Mean matched pixel distance divided by the image side, times 100
// (percent of image size). Matching happens in normalized coordinates;
// reporting converts to pixel space at the given resolution. Non-square
// inputs normalize by the geometric mean of the sides.
double normalized_l2(const KeypointSet& pred, const KeypointSet& gt, int resolution);
double normalized_l2(const KeypointSet& pred, const KeypointSet& gt, int width, int height);

// Summed matched pixel distance at a fixed 256 x 256 resolution.
double summed_l2(const KeypointSet& pred, const KeypointSet& gt);

// Exhaustive reference used by tests and sanity checks (N <= ~9).
MatchResult match_keypoints_brute_force(const KeypointSet& pred, const KeypointSet& gt);

// Criterion helper: mean effective link weight over GT-adjacent joint pairs
// vs non-adjacent pairs, with predicted indices mapped through each frame's
// assignment.
struct ConnectivityStats {
  double adjacent_mean = 0.0;
  double non_adjacent_mean = 0.0;
  int64_t adjacent_count = 0;
  int64_t non_adjacent_count = 0;
};

ConnectivityStats connectivity_alignment(
    const TensorT<double>& effective_w, const std::vector<MatchResult>& matches,
    const std::vector<std::pair<int, int>>& gt_edges, int n_gt);

}  // namespace ppl
