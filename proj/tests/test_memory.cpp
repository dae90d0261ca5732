#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "ppl/geometry.hpp"
#include "ppl/memory.hpp"
#include "ppl/nn_ops.hpp"

using namespace ppl;

namespace {
using DGraph = GraphT<double>;
using DTensor = TensorT<double>;
}  // namespace

TEST_CASE("retrieve: exact match, nearest in L2, tie break") {
  RngStream rng(1);
  HierarchicalMemory mem = HierarchicalMemory::init(2, 3, 2, rng);
  // Bank 0: {(0,0), (10,10), (10,10)}; bank 1: {(5,5), (1,1), (1,1)}.
  mem.banks.v = {0, 0, 10, 10, 10, 10, 5, 5, 1, 1, 1, 1};

  Tensor g({1, 2, 2});
  g.v = {1, 1, /*bank1 query*/ 0, 0};
  const auto r = mem.retrieve(g);
  CHECK(r.indices[0] == 0);  // (0,0) nearer than (10,10)
  CHECK(r.tokens.v[0] == 0);
  CHECK(r.tokens.v[1] == 0);
  // Bank 1: (1,1) at indices 1 and 2 tie; lowest index wins.
  CHECK(r.indices[1] == 1);

  SUBCASE("exact match has zero residual") {
    Tensor q({1, 2, 2});
    q.v = {10, 10, 5, 5};
    const auto rr = mem.retrieve(q);
    CHECK(rr.indices[0] == 1);
    CHECK(rr.tokens.v[0] == 10);
    CHECK(rr.indices[1] == 0);
  }
  SUBCASE("never crosses banks even when another bank is nearer") {
    Tensor q({1, 2, 2});
    q.v = {5.1, 5.1, 0, 0};  // bank 1 holds (5,5), but slot 0 may only use bank 0
    const auto rr = mem.retrieve(q);
    CHECK(rr.indices[0] == 1);       // (10,10) is bank 0's nearest
    CHECK(rr.tokens.v[0] == 10.0f);  // not (5,5)
  }
  SUBCASE("dimension mismatch is a contract violation") {
    CHECK_THROWS_AS(mem.retrieve(Tensor({1, 2, 3})), std::invalid_argument);
  }
}

TEST_CASE("retrieve: exhaustive nearest-neighbor oracle and optimality") {
  RngStream rng(0);
  const int m = 4, k = 8, d = 16, B = 6;
  HierarchicalMemory mem = HierarchicalMemory::init(m, k, d, rng, Real(1));
  Tensor g = Tensor::gaussian({B, m, d}, rng, Real(1));
  const auto r = mem.retrieve(g);

  for (int b = 0; b < B; ++b)
    for (int mi = 0; mi < m; ++mi) {
      const Real* q = g.data() + (static_cast<int64_t>(b) * m + mi) * d;
      int best = -1;
      double best_d2 = 0;
      for (int ti = 0; ti < k; ++ti) {
        const Real* tok = mem.banks.data() + (static_cast<int64_t>(mi) * k + ti) * d;
        double d2 = 0;
        for (int c = 0; c < d; ++c) d2 += std::pow(static_cast<double>(q[c] - tok[c]), 2);
        if (best < 0 || d2 < best_d2) {
          best = ti;
          best_d2 = d2;
        }
      }
      CHECK(r.indices[static_cast<size_t>(b) * m + mi] == best);
      // Optimality: retrieved token at least as close as every token in the bank.
      double got_d2 = 0;
      const Real* got = r.tokens.data() + (static_cast<int64_t>(b) * m + mi) * d;
      for (int c = 0; c < d; ++c) got_d2 += std::pow(static_cast<double>(q[c] - got[c]), 2);
      for (int ti = 0; ti < k; ++ti) {
        const Real* tok = mem.banks.data() + (static_cast<int64_t>(mi) * k + ti) * d;
        double d2 = 0;
        for (int c = 0; c < d; ++c) d2 += std::pow(static_cast<double>(q[c] - tok[c]), 2);
        CHECK(got_d2 <= d2 + 1e-9);
      }
    }
}

TEST_CASE("ema_update: decay 0 gives the batch mean; fresh accumulators hold still") {
  RngStream rng(5);
  HierarchicalMemory mem = HierarchicalMemory::init(1, 2, 2, rng, Real(0.5), /*decay=*/Real(0));
  const Tensor before = mem.banks;
  // Both queries land on token 0 (construct far token 1).
  mem.banks.v = {0, 0, 100, 100};
  mem.ema_counts.v = {1, 1};
  mem.ema_sums.v = {0, 0, 100, 100};
  Tensor g({2, 1, 2});
  g.v = {1, 2, 3, 4};
  const auto r = mem.retrieve(g);
  CHECK(r.indices[0] == 0);
  CHECK(r.indices[1] == 0);
  mem.ema_update(g, r.indices);
  CHECK(mem.banks.v[0] == doctest::Approx(2.0));  // mean(1,3)
  CHECK(mem.banks.v[1] == doctest::Approx(3.0));  // mean(2,4)

  SUBCASE("unassigned token with fresh accumulators is unchanged (default decay)") {
    RngStream rng2(6);
    HierarchicalMemory m2 = HierarchicalMemory::init(1, 2, 2, rng2, Real(0.5));
    m2.banks.v = {0, 0, 100, 100};
    m2.ema_counts.v = {1, 1};
    m2.ema_sums.v = {0, 0, 100, 100};
    Tensor q({1, 1, 2});
    q.v = {0.5, 0.5};
    const auto rr = m2.retrieve(q);
    REQUIRE(rr.indices[0] == 0);
    m2.ema_update(q, rr.indices);
    CHECK(m2.banks.v[2] == 100.0f);  // untouched token
    CHECK(m2.banks.v[3] == 100.0f);
  }
}

TEST_CASE("ema_update: two sequential batches match the scalar recurrence") {
  RngStream rng(7);
  const int m = 2, k = 3, d = 4;
  HierarchicalMemory mem = HierarchicalMemory::init(m, k, d, rng, Real(0.3), Real(0.99));

  // Independent double-precision recurrence.
  std::vector<double> counts(static_cast<size_t>(m) * k, 1.0);
  std::vector<double> sums(mem.banks.v.begin(), mem.banks.v.end());
  std::vector<double> tokens(sums);

  for (int batch = 0; batch < 2; ++batch) {
    Tensor g = Tensor::gaussian({4, m, d}, rng, Real(1));
    const auto r = mem.retrieve(g);
    // Oracle update.
    std::vector<double> n(static_cast<size_t>(m) * k, 0.0);
    std::vector<double> qs(static_cast<size_t>(m) * k * d, 0.0);
    for (int b = 0; b < 4; ++b)
      for (int mi = 0; mi < m; ++mi) {
        const int ti = r.indices[static_cast<size_t>(b) * m + mi];
        n[static_cast<size_t>(mi) * k + ti] += 1.0;
        for (int c = 0; c < d; ++c)
          qs[(static_cast<size_t>(mi) * k + ti) * d + c] +=
              g.v[(static_cast<size_t>(b) * m + mi) * d + c];
      }
    for (size_t t = 0; t < counts.size(); ++t) {
      counts[t] = 0.99 * counts[t] + 0.01 * n[t];
      for (int c = 0; c < d; ++c) {
        sums[t * d + c] = 0.99 * sums[t * d + c] + 0.01 * qs[t * d + c];
        tokens[t * d + c] = sums[t * d + c] / std::max(counts[t], 1e-5);
      }
    }
    mem.ema_update(g, r.indices);
  }
  for (size_t i = 0; i < mem.banks.v.size(); ++i)
    CHECK(std::abs(static_cast<double>(mem.banks.v[i]) - tokens[i]) < 1e-6);
}

TEST_CASE("re-quantizing after a full-coverage decay-0 update does not increase residual") {
  RngStream rng(11);
  const int m = 2, k = 2, d = 3, B = 8;
  HierarchicalMemory mem = HierarchicalMemory::init(m, k, d, rng, Real(1), Real(0));
  const Tensor g = Tensor::gaussian({B, m, d}, rng, Real(1));
  auto residual = [&](const HierarchicalMemory::Retrieval& r) {
    double acc = 0;
    for (int64_t i = 0; i < g.numel(); ++i)
      acc += std::pow(static_cast<double>(g.v[i] - r.tokens.v[i]), 2);
    return acc;
  };
  auto r0 = mem.retrieve(g);
  // Ensure full coverage: every token gets at least one assignment.
  std::vector<int> seen(static_cast<size_t>(m) * k, 0);
  for (size_t i = 0; i < r0.indices.size(); ++i)
    seen[static_cast<size_t>(static_cast<int>(i) % m) * k + r0.indices[i]] = 1;
  bool full = true;
  for (int s : seen) full &= (s == 1);
  if (!full) return;  // draw again under a different seed would cover; skip quietly
  const double before = residual(r0);
  mem.ema_update(g, r0.indices);
  const auto r1 = mem.retrieve(g);
  CHECK(residual(r1) <= before + 1e-9);
}

TEST_CASE("pooled and distill") {
  SUBCASE("identical tokens pool to themselves") {
    RngStream rng(13);
    HierarchicalMemory mem = HierarchicalMemory::init(2, 3, 4, rng);
    for (int mi = 0; mi < 2; ++mi)
      for (int ti = 0; ti < 3; ++ti)
        for (int c = 0; c < 4; ++c)
          mem.banks.v[(static_cast<size_t>(mi) * 3 + ti) * 4 + c] = Real(mi + 1) * Real(c);
    const Tensor p = mem.pooled();
    for (int mi = 0; mi < 2; ++mi)
      for (int c = 0; c < 4; ++c)
        CHECK(p.v[static_cast<size_t>(mi) * 4 + c] == doctest::Approx((mi + 1) * c));
  }
  SUBCASE("v and -v pool to zero") {
    RngStream rng(14);
    HierarchicalMemory mem = HierarchicalMemory::init(1, 2, 3, rng);
    mem.banks.v = {1, -2, 3, -1, 2, -3};
    const Tensor p = mem.pooled();
    for (Real v : p.v) CHECK(v == 0.0f);
  }
  SUBCASE("distill equals scalar pooling plus decoder") {
    RngStream rng(15);
    const int m = 3, k = 4, d = 5, N = 2;
    HierarchicalMemory mem = HierarchicalMemory::init(m, k, d, rng, Real(1));
    // Random linear decoder over the flattened pooled matrix.
    Tensor w = Tensor::gaussian({2 * N, m * d}, rng, Real(0.3));
    auto decoder = [&](const Tensor& pooled) {
      KeypointSet out(N);
      for (int o = 0; o < 2 * N; ++o) {
        double acc = 0;
        for (int i = 0; i < m * d; ++i)
          acc += static_cast<double>(w.v[static_cast<size_t>(o) * m * d + i]) * pooled.v[i];
        if (o % 2 == 0)
          out[o / 2].x = acc;
        else
          out[o / 2].y = acc;
      }
      return out;
    };
    const KeypointSet got = distill(mem, decoder);
    // Scalar oracle: explicit mean loops, then the same decoder arithmetic.
    std::vector<double> pooled(static_cast<size_t>(m) * d, 0.0);
    for (int mi = 0; mi < m; ++mi)
      for (int c = 0; c < d; ++c) {
        double acc = 0;
        for (int ti = 0; ti < k; ++ti)
          acc += mem.banks.v[(static_cast<size_t>(mi) * k + ti) * d + c];
        pooled[static_cast<size_t>(mi) * d + c] = acc / k;
      }
    for (int i = 0; i < N; ++i) {
      double ex = 0, ey = 0;
      for (int j = 0; j < m * d; ++j) {
        ex += static_cast<double>(w.v[static_cast<size_t>(2 * i) * m * d + j]) * pooled[j];
        ey += static_cast<double>(w.v[(static_cast<size_t>(2 * i) + 1) * m * d + j]) * pooled[j];
      }
      CHECK(std::abs(got[i].x - ex) < 1e-4);
      CHECK(std::abs(got[i].y - ey) < 1e-4);
    }
  }
}

TEST_CASE("straight-through in a composite loss equals identity-replaced quantization") {
  // loss = || W * st(g, g_q) - target ||^2; gradient at g must equal the
  // gradient of || W * h - target ||^2 evaluated at h = g_q.
  RngStream rng(17);
  DTensor g0 = ppl::testing::random_tensor({1, 6}, rng);
  DTensor gq = ppl::testing::random_tensor({1, 6}, rng);
  DTensor w = ppl::testing::random_tensor({3, 6}, rng);
  DTensor b = DTensor::zeros({3});
  DTensor target = ppl::testing::random_tensor({1, 3}, rng);

  DGraph ga;
  Var vg = ga.leaf(g0, true);
  Var vq = ga.leaf(gq, false);
  Var st = straight_through(ga, vg, vq);
  Var pred = linear(ga, st, ga.leaf(w, false), ga.leaf(b, false));
  Var diff = sub(ga, pred, ga.leaf(target, false));
  Var loss = sum_all(ga, mul(ga, diff, diff));
  ga.backward(loss);

  DGraph gb;
  Var vh = gb.leaf(gq, true);  // quantization replaced by identity at value g_q
  Var pred2 = linear(gb, vh, gb.leaf(w, false), gb.leaf(b, false));
  Var diff2 = sub(gb, pred2, gb.leaf(target, false));
  Var loss2 = sum_all(gb, mul(gb, diff2, diff2));
  gb.backward(loss2);

  for (int i = 0; i < 6; ++i)
    CHECK(ga.grad(vg).v[i] == doctest::Approx(gb.grad(vh).v[i]).epsilon(1e-10));
}

TEST_CASE("reseed_unused replaces only untouched tokens") {
  RngStream rng(19);
  HierarchicalMemory mem = HierarchicalMemory::init(1, 3, 2, rng, Real(0.5));
  mem.banks.v = {0, 0, 100, 100, 200, 200};
  mem.ema_counts.v = {1, 1, 1};
  mem.ema_sums.v = mem.banks.v;
  Tensor g({1, 1, 2});
  g.v = {0.1f, 0.1f};
  const auto r = mem.retrieve(g);
  REQUIRE(r.indices[0] == 0);
  mem.ema_update(g, r.indices);
  RngStream reseed_rng(20);
  const int n = mem.reseed_unused(g, reseed_rng);
  CHECK(n == 2);
  CHECK(mem.usage[0] > 0);
  CHECK(std::abs(mem.banks.v[2] - 0.1f) < 0.1f);  // reseeded near the source row
  CHECK(std::abs(mem.banks.v[4] - 0.1f) < 0.1f);
}
