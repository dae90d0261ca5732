#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ppl/evaluation.hpp"
#include "ppl/rng.hpp"

using namespace ppl;

namespace {

KeypointSet random_points(int n, RngStream& rng, double spread = 0.8) {
  KeypointSet ks(n);
  for (auto& p : ks.points)
    p = {rng.next_uniform() * 2 * spread - spread, rng.next_uniform() * 2 * spread - spread};
  return ks;
}

}  // namespace

TEST_CASE("match_keypoints: identity, permutation recovery, contract") {
  RngStream rng(3);
  const KeypointSet gt = random_points(8, rng);

  SUBCASE("pred == gt gives the identity assignment at zero cost") {
    const MatchResult m = match_keypoints(gt, gt);
    CHECK(m.total_cost == doctest::Approx(0.0));
    for (int i = 0; i < 8; ++i) CHECK(m.assignment[static_cast<size_t>(i)] == i);
  }
  SUBCASE("permuted prediction recovers the inverse permutation at zero cost") {
    std::vector<int> perm = {3, 1, 7, 0, 5, 2, 6, 4};
    KeypointSet pred(8);
    for (int i = 0; i < 8; ++i) pred[i] = gt[perm[static_cast<size_t>(i)]];
    const MatchResult m = match_keypoints(pred, gt);
    CHECK(m.total_cost == doctest::Approx(0.0));
    for (int i = 0; i < 8; ++i) CHECK(m.assignment[static_cast<size_t>(i)] == perm[static_cast<size_t>(i)]);
  }
  SUBCASE("empty input is a contract violation") {
    CHECK_THROWS_AS(match_keypoints(KeypointSet(0), gt), std::invalid_argument);
  }
}

TEST_CASE("match_keypoints equals brute force on 1000 random instances (N = 6)") {
  RngStream rng(0);
  for (int trial = 0; trial < 1000; ++trial) {
    const KeypointSet pred = random_points(6, rng);
    const KeypointSet gt = random_points(6, rng);
    const MatchResult fast = match_keypoints(pred, gt);
    const MatchResult slow = match_keypoints_brute_force(pred, gt);
    CHECK(fast.total_cost == doctest::Approx(slow.total_cost).epsilon(1e-12));
    // The assignment itself must be a valid bijection with that cost.
    double acc = 0;
    std::vector<int> seen(6, 0);
    for (int i = 0; i < 6; ++i) {
      const int j = fast.assignment[static_cast<size_t>(i)];
      REQUIRE(j >= 0);
      seen[static_cast<size_t>(j)]++;
      acc += std::hypot(pred[i].x - gt[j].x, pred[i].y - gt[j].y);
    }
    for (int s : seen) CHECK(s == 1);
    CHECK(acc == doctest::Approx(fast.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("match_keypoints: rectangular cases cover min(N_p, N_g) pairs") {
  RngStream rng(7);
  const KeypointSet small = random_points(4, rng);
  const KeypointSet big = random_points(7, rng);
  const MatchResult up = match_keypoints(small, big);
  CHECK(std::count_if(up.assignment.begin(), up.assignment.end(), [](int j) { return j >= 0; }) == 4);
  const MatchResult down = match_keypoints(big, small);
  CHECK(std::count_if(down.assignment.begin(), down.assignment.end(), [](int j) { return j >= 0; }) == 4);
}

TEST_CASE("matching properties: optimality bounds, cost symmetry, permutation invariance") {
  RngStream rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const KeypointSet pred = random_points(7, rng);
    const KeypointSet gt = random_points(7, rng);
    const MatchResult m = match_keypoints(pred, gt);

    // Never worse than identity or a random permutation.
    double ident = 0;
    for (int i = 0; i < 7; ++i) ident += std::hypot(pred[i].x - gt[i].x, pred[i].y - gt[i].y);
    CHECK(m.total_cost <= ident + 1e-12);
    std::vector<int> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 6; i > 0; --i) std::swap(perm[static_cast<size_t>(i)], perm[rng.next_below(static_cast<uint64_t>(i + 1))]);
    double randc = 0;
    for (int i = 0; i < 7; ++i)
      randc += std::hypot(pred[i].x - gt[perm[static_cast<size_t>(i)]].x,
                          pred[i].y - gt[perm[static_cast<size_t>(i)]].y);
    CHECK(m.total_cost <= randc + 1e-12);

    // Cost is symmetric in the arguments.
    const MatchResult rev = match_keypoints(gt, pred);
    CHECK(m.total_cost == doctest::Approx(rev.total_cost).epsilon(1e-12));
  }
}

TEST_CASE("normalized_l2: unit anchors and scalar oracle") {
  SUBCASE("perfect prediction scores zero") {
    RngStream rng(13);
    const KeypointSet gt = random_points(6, rng);
    CHECK(normalized_l2(gt, gt, 256) == doctest::Approx(0.0));
  }
  SUBCASE("a single keypoint off by 2.56% of the side reports 2.56") {
    KeypointSet gt(1), pred(1);
    gt[0] = {0.0, 0.0};
    // Pixel offset of 2.56% of a 256-px side = 6.5536 px = 0.0512 normalized.
    pred[0] = {2.0 * 0.0256, 0.0};
    CHECK(normalized_l2(pred, gt, 256) == doctest::Approx(2.56).epsilon(1e-9));
  }
  SUBCASE("random 4-point instance matches explicit loops") {
    RngStream rng(17);
    const KeypointSet pred = random_points(4, rng);
    const KeypointSet gt = random_points(4, rng);
    const MatchResult m = match_keypoints(pred, gt);
    double acc = 0;
    for (int i = 0; i < 4; ++i) {
      const int j = m.assignment[static_cast<size_t>(i)];
      const double dx = (pred[i].x - gt[j].x) * 0.5 * 128;
      const double dy = (pred[i].y - gt[j].y) * 0.5 * 128;
      acc += std::sqrt(dx * dx + dy * dy);
    }
    const double expect = acc / 4 / 128 * 100;
    CHECK(std::abs(normalized_l2(pred, gt, 128) - expect) < 1e-9);
  }
  SUBCASE("invariant under simultaneous permutation") {
    RngStream rng(19);
    const KeypointSet pred = random_points(6, rng);
    const KeypointSet gt = random_points(6, rng);
    KeypointSet pred2(6), gt2(6);
    const std::vector<int> perm = {5, 3, 0, 1, 4, 2};
    for (int i = 0; i < 6; ++i) {
      pred2[i] = pred[perm[static_cast<size_t>(i)]];
      gt2[i] = gt[perm[static_cast<size_t>(i)]];
    }
    CHECK(normalized_l2(pred, gt, 128) == doctest::Approx(normalized_l2(pred2, gt2, 128)).epsilon(1e-12));
  }
}

TEST_CASE("summed_l2: pixel-sum semantics at 256") {
  RngStream rng(23);
  const KeypointSet gt = random_points(5, rng);
  CHECK(summed_l2(gt, gt) == doctest::Approx(0.0));

  KeypointSet pred = gt;
  // Move one point by exactly 10 px at 256 resolution: 10/128 normalized.
  pred[2].x += 10.0 / 128.0;
  CHECK(summed_l2(pred, gt) == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("connectivity_alignment maps weights through per-frame assignments") {
  // 3 gt joints in a chain 0-1-2; predictions permuted by one fixed shuffle.
  TensorT<double> w({3, 3});
  auto set = [&](int i, int j, double v) { w.v[i * 3 + j] = w.v[j * 3 + i] = v; };
  set(0, 1, 0.9);  // pred 0 <-> pred 1
  set(0, 2, 0.8);
  set(1, 2, 0.1);
  MatchResult m;
  m.assignment = {2, 0, 1};  // pred0->gt2, pred1->gt0, pred2->gt1
  const std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}};
  const ConnectivityStats st = connectivity_alignment(w, {m}, edges, 3);
  // gt pair (0,1) -> preds (1,2): w=0.1 (adjacent)
  // gt pair (1,2) -> preds (2,0): w=0.8 (adjacent)
  // gt pair (0,2) -> preds (1,0): w=0.9 (non-adjacent)
  CHECK(st.adjacent_count == 2);
  CHECK(st.non_adjacent_count == 1);
  CHECK(st.adjacent_mean == doctest::Approx(0.45));
  CHECK(st.non_adjacent_mean == doctest::Approx(0.9));
}
