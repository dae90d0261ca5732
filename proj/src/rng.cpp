#include "ppl/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ppl {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t RngStream::next_u64() {
  return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_));
}

double RngStream::next_uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t RngStream::next_below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::next_below: n must be > 0");
  // Rejection sampling over the top bits avoids modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double RngStream::next_gaussian() {
  // Box-Muller; u1 kept away from 0 so log() is finite.
  double u1 = next_uniform();
  double u2 = next_uniform();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<int> RngStream::sample_without_replacement(int n, int take) {
  if (take < 0 || take > n) throw std::invalid_argument("sample_without_replacement: bad take");
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  for (int i = 0; i < take; ++i) {
    const int j = i + static_cast<int>(next_below(static_cast<uint64_t>(n - i)));
    std::swap(perm[i], perm[j]);
  }
  perm.resize(take);
  return perm;
}

RngStream named_stream(uint64_t root_seed, const std::string& name) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stream name
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(splitmix64(root_seed ^ h));
}

}  // namespace ppl
