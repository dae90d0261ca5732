#include "ppl/memory.hpp"

#include <cmath>
#include <stdexcept>

namespace ppl {

HierarchicalMemory HierarchicalMemory::init(int m, int k, int d, RngStream& rng,
                                            Real init_std, Real decay) {
  if (m <= 0 || k <= 0 || d <= 0)
    throw std::invalid_argument("HierarchicalMemory: m, k, d must be positive");
  HierarchicalMemory mem;
  mem.banks_count = m;
  mem.tokens_per_bank = k;
  mem.token_dim = d;
  mem.decay = decay;
  mem.banks = Tensor::gaussian({m, k, d}, rng, init_std);
  mem.ema_counts = Tensor::full({m, k}, Real(1));
  mem.ema_sums = mem.banks;
  mem.usage.assign(static_cast<size_t>(m) * k, 0);
  return mem;
}

HierarchicalMemory::Retrieval HierarchicalMemory::retrieve(const Tensor& g) const {
  if (g.ndim() != 3 || g.dim(1) != banks_count || g.dim(2) != token_dim)
    throw std::invalid_argument("retrieve: queries must be (B, m, d)");
  const int B = g.dim(0);
  Retrieval r;
  r.tokens = Tensor({B, banks_count, token_dim});
  r.indices.resize(static_cast<size_t>(B) * banks_count);
  for (int bi = 0; bi < B; ++bi) {
    for (int mi = 0; mi < banks_count; ++mi) {
      const Real* q = g.data() + (static_cast<int64_t>(bi) * banks_count + mi) * token_dim;
      const Real* bank = banks.data() + static_cast<int64_t>(mi) * tokens_per_bank * token_dim;
      int best = 0;
      Real best_d2 = Real(0);
      for (int ti = 0; ti < tokens_per_bank; ++ti) {
        Real d2 = Real(0);
        const Real* tok = bank + static_cast<int64_t>(ti) * token_dim;
        for (int c = 0; c < token_dim; ++c) {
          const Real diff = q[c] - tok[c];
          d2 += diff * diff;
        }
        if (ti == 0 || d2 < best_d2) {
          best_d2 = d2;
          best = ti;
        }
      }
      r.indices[static_cast<size_t>(bi) * banks_count + mi] = best;
      const Real* tok = bank + static_cast<int64_t>(best) * token_dim;
      Real* dst = r.tokens.data() + (static_cast<int64_t>(bi) * banks_count + mi) * token_dim;
      for (int c = 0; c < token_dim; ++c) dst[c] = tok[c];
    }
  }
  return r;
}

void HierarchicalMemory::ema_update(const Tensor& g, const std::vector<int>& indices) {
  if (g.ndim() != 3 || g.dim(1) != banks_count || g.dim(2) != token_dim)
    throw std::invalid_argument("ema_update: queries must be (B, m, d)");
  const int B = g.dim(0);
  if (indices.size() != static_cast<size_t>(B) * banks_count)
    throw std::invalid_argument("ema_update: indices do not match batch");
  // Per-token batch statistics.
  std::vector<Real> n_assigned(static_cast<size_t>(banks_count) * tokens_per_bank, Real(0));
  std::vector<Real> q_sum(banks.v.size(), Real(0));
  for (int bi = 0; bi < B; ++bi) {
    for (int mi = 0; mi < banks_count; ++mi) {
      const int ti = indices[static_cast<size_t>(bi) * banks_count + mi];
      if (ti < 0 || ti >= tokens_per_bank)
        throw std::invalid_argument("ema_update: token index out of range");
      n_assigned[static_cast<size_t>(mi) * tokens_per_bank + ti] += Real(1);
      const Real* q = g.data() + (static_cast<int64_t>(bi) * banks_count + mi) * token_dim;
      Real* acc = q_sum.data() + (static_cast<int64_t>(mi) * tokens_per_bank + ti) * token_dim;
      for (int c = 0; c < token_dim; ++c) acc[c] += q[c];
      usage[static_cast<size_t>(mi) * tokens_per_bank + ti]++;
    }
  }
  const Real one_minus = Real(1) - decay;
  for (int64_t t = 0; t < total_tokens(); ++t) {
    ema_counts.v[t] = decay * ema_counts.v[t] + one_minus * n_assigned[t];
    Real* sum = ema_sums.data() + t * token_dim;
    const Real* qs = q_sum.data() + t * token_dim;
    Real* tok = banks.data() + t * token_dim;
    const Real denom = std::max(ema_counts.v[t], eps);
    for (int c = 0; c < token_dim; ++c) {
      sum[c] = decay * sum[c] + one_minus * qs[c];
      tok[c] = sum[c] / denom;
    }
  }
}

Tensor HierarchicalMemory::pooled() const {
  Tensor out({banks_count, token_dim});
  const Real inv_k = Real(1) / static_cast<Real>(tokens_per_bank);
  for (int mi = 0; mi < banks_count; ++mi) {
    Real* dst = out.data() + static_cast<int64_t>(mi) * token_dim;
    for (int ti = 0; ti < tokens_per_bank; ++ti) {
      const Real* tok =
          banks.data() + (static_cast<int64_t>(mi) * tokens_per_bank + ti) * token_dim;
      for (int c = 0; c < token_dim; ++c) dst[c] += tok[c];
    }
    for (int c = 0; c < token_dim; ++c) dst[c] *= inv_k;
  }
  return out;
}

void HierarchicalMemory::reset_usage() {
  usage.assign(static_cast<size_t>(banks_count) * tokens_per_bank, 0);
}

int HierarchicalMemory::reseed_unused(const Tensor& source, RngStream& rng) {
  if (source.numel() < token_dim)
    throw std::invalid_argument("reseed_unused: source too small");
  const int64_t rows = source.numel() / token_dim;
  int reseeded = 0;
  for (int64_t t = 0; t < total_tokens(); ++t) {
    if (usage[static_cast<size_t>(t)] > 0) continue;
    const int64_t row = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(rows)));
    const Real* src = source.data() + row * token_dim;
    Real* tok = banks.data() + t * token_dim;
    for (int c = 0; c < token_dim; ++c)
      tok[c] = src[c] + Real(0.01) * static_cast<Real>(rng.next_gaussian());
    // Accumulators restart consistent with the new value.
    ema_counts.v[t] = Real(1);
    Real* sum = ema_sums.data() + t * token_dim;
    for (int c = 0; c < token_dim; ++c) sum[c] = tok[c];
    ++reseeded;
  }
  return reseeded;
}

}  // namespace ppl
