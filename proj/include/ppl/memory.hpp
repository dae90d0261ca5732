#pragma once

#include <vector>

#include "ppl/rng.hpp"
#include "ppl/tensor.hpp"

namespace ppl {

// m independent banks of k tokens with d dims. Tokens are not gradient
// parameters: they live outside the tape and move only through EMA updates
// on retrieval statistics. Accumulators start consistent with the initial
// token values (count 1, sum = token), so unassigned tokens hold steady.
struct HierarchicalMemory {
  int banks_count = 0;   // m
  int tokens_per_bank = 0;  // k
  int token_dim = 0;     // d
  Real decay = Real(0.99);
  Real eps = Real(1e-5);

  Tensor banks;       // (m, k, d) current token values
  Tensor ema_counts;  // (m, k)
  Tensor ema_sums;    // (m, k, d)
  std::vector<int64_t> usage;  // per-token assignment counter since last reset

  static HierarchicalMemory init(int m, int k, int d, RngStream& rng,
                                 Real init_std = Real(0.02),
                                 Real decay = Real(0.99));

  struct Retrieval {
    Tensor tokens;             // (B, m, d) nearest tokens, bank i for slot i
    std::vector<int> indices;  // B*m winning token indices within each bank
  };

  // Per-bank nearest neighbor in L2; ties broken by lowest token index.
  Retrieval retrieve(const Tensor& g) const;

  // count <- decay*count + (1-decay)*n_assigned;
  // sum   <- decay*sum   + (1-decay)*sum of assigned queries;
  // token <- sum / max(count, eps).
  void ema_update(const Tensor& g, const std::vector<int>& indices);

  // Mean over the k tokens of each bank: (m, d).
  Tensor pooled() const;

  void reset_usage();
  // Optional dead-token handling: re-seeds tokens unused since the last
  // reset from rows of `source` (B*m, d view of encoder outputs) plus noise.
  int reseed_unused(const Tensor& source, RngStream& rng);

  int64_t total_tokens() const {
    return static_cast<int64_t>(banks_count) * tokens_per_bank;
  }
};

// Decodes the per-bank pooled vectors into the keypoint prior via any
// decoder mapping (m, d) -> keypoints.
template <class Decoder>
auto distill(const HierarchicalMemory& mem, Decoder&& decoder) {
  return decoder(mem.pooled());
}

}  // namespace ppl
