#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ppl {

// Counter-based random stream. State is (key, counter), so streams are
// serializable and independent draws never depend on library internals.
class RngStream {
 public:
  RngStream() = default;
  RngStream(uint64_t key, uint64_t counter = 0) : key_(key), counter_(counter) {}

  uint64_t next_u64();
  // Uniform in [0, 1).
  double next_uniform();
  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n);
  // Standard normal via Box-Muller (one value per call; no cached spare,
  // keeps the state a pure counter).
  double next_gaussian();

  uint64_t key() const { return key_; }
  uint64_t counter() const { return counter_; }
  void set_counter(uint64_t c) { counter_ = c; }

  // Partial Fisher-Yates: first `take` elements of a random permutation of 0..n-1.
  std::vector<int> sample_without_replacement(int n, int take);

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
};

// Derives an independent stream from a root seed and a stream name
// (e.g. "data", "init", "masking", "sampling").
RngStream named_stream(uint64_t root_seed, const std::string& name);

uint64_t splitmix64(uint64_t x);

}  // namespace ppl
