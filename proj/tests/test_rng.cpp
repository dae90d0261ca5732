#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "ppl/rng.hpp"

using namespace ppl;

TEST_CASE("streams are deterministic and serializable") {
  RngStream a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  RngStream c(42);
  c.set_counter(a.counter());
  CHECK(c.next_u64() == a.next_u64());
}

TEST_CASE("named streams are independent") {
  RngStream a = named_stream(7, "data");
  RngStream b = named_stream(7, "init");
  CHECK(a.next_u64() != b.next_u64());
  RngStream a2 = named_stream(7, "data");
  a2.next_u64();
  CHECK(a.counter() == a2.counter());
}

TEST_CASE("uniform and gaussian moments are sane") {
  RngStream rng(3);
  double sum = 0, sum2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.next_uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sum2 += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sum2 / n == doctest::Approx(1.0 / 3).epsilon(0.03));

  double gsum = 0, gsum2 = 0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    gsum += g;
    gsum2 += g * g;
  }
  CHECK(std::abs(gsum / n) < 0.03);
  CHECK(gsum2 / n == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("next_below stays in range and covers it") {
  RngStream rng(5);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const uint64_t v = rng.next_below(7);
    CHECK(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
}

TEST_CASE("sample_without_replacement draws distinct indices") {
  RngStream rng(9);
  auto picks = rng.sample_without_replacement(1024, 256);
  CHECK(picks.size() == 256);
  std::set<int> s(picks.begin(), picks.end());
  CHECK(s.size() == 256);
  for (int p : picks) {
    CHECK(p >= 0);
    CHECK(p < 1024);
  }
  // Same seed, same picks.
  RngStream rng2(9);
  CHECK(rng2.sample_without_replacement(1024, 256) == picks);
}
