#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ppl/geometry.hpp"
#include "ppl/memory.hpp"
#include "ppl/nn.hpp"
#include "ppl/render.hpp"

namespace ppl {

struct ModelConfig {
  int resolution = 128;
  int n_keypoints = 16;       // N
  int memory_banks = 34;      // m
  int tokens_per_bank = 16;   // k
  int token_dim = 512;        // d
  int mixer_depth = 4;
  int mixer_expansion = 4;
  std::vector<int> enc_widths = {32, 64, 128, 256};
  std::vector<int> dec_widths = {32, 64, 128, 256};
  int prior_embed_dim = 256;
  int head_hidden = 512;
  double sigma_sq = 5e-4;
  int heat_res = 0;           // 0 = same as resolution
  Real memory_decay = Real(0.99);
  Real memory_init_std = Real(0.02);
  Real link_lr_scale = Real(512);
  bool reseed_dead_tokens = false;

  int heat_resolution() const { return heat_res > 0 ? heat_res : resolution; }
  void validate() const;
};

struct LossWeights {
  Real ir = Real(1);
  Real b = Real(1);
  Real l = Real(1);
  Real kr = Real(1);
};

struct LossBreakdown {
  double l_ir = 0, l_b = 0, l_l = 0, l_kr = 0;
  double total = 0;
  LossWeights weights;
};

// Tape handles produced by one training forward pass. Kept so tests can
// backpropagate individual components and audit gradient routing.
struct ForwardVars {
  Var l_ir, l_b, l_l, l_kr, total;
  Var t_prime;        // (B,N,2) estimated keypoints
  Var t_prime_recon;  // (B,N,2) memory round-trip reconstruction
  Var tokens;         // (B,m,d) G
  Var tokens_q;       // straight-through leaf G' (requires_grad, must stay 0)
  Var heatmap;        // (B,1,H,W) S
  Var reconstructed;  // (B,3,H,W) I_recon
  Var theta;          // (B,N,6)
  Var eff_w;          // (N,N)
  std::vector<int> retrieval_indices;
  LossBreakdown losses;
};

class PPLModel {
 public:
  PPLModel(const ModelConfig& cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  HierarchicalMemory& memory() { return memory_; }
  const HierarchicalMemory& memory() const { return memory_; }
  const PerceptualPyramid& perceptual() const { return psi_; }

  // Current keypoint prior T: mean-pool each memory bank, decode with the
  // shared MIX_dec. Runs off-tape; T is always consumed detached.
  KeypointSet distill_prior();

  // Effective connectivity weights from the raw parameter (off-tape).
  TensorT<double> connectivity() const;

  // Full training forward with the detachment schedule:
  //  image path: L_ir, L_b, L_l -> phi_enc, head, raw W, phi_dec, embedder
  //              (T detached at the transformation input);
  //  memory path: L_kr -> MIX_enc / MIX_dec through straight-through
  //              quantization (T' detached at the MIX_enc input).
  // Parameters must be attached to g beforehand.
  ForwardVars forward_with_detachments(Graph& g, const Tensor& frames,
                                       const Tensor& refs, const LossWeights& w);

  // --- inference-time pieces (no-grad graphs built internally) ---
  Tensor estimate_keypoints(const Tensor& frames);                  // (B,N,2)
  Tensor refine_keypoints(const Tensor& t_prime);                   // (B,N,2)
  Tensor render_heatmap(const Tensor& keypoints);                   // (B,1,H,W)
  Tensor decode_frames(const Tensor& refs, const Tensor& heatmap);  // (B,3,H,W)

  // Named parameter groups for audits and checkpoints.
  static const std::vector<std::string>& group_names();
  std::vector<Param*> group(const std::string& name) const;

 private:
  Var image_path_keypoints(Graph& g, Var frames_var, const KeypointSet& prior);

  ModelConfig cfg_;
  ParamStore params_;
  ImageEncoder phi_enc_;
  PriorEmbedder prior_embed_;
  AffineHead head_;
  ImageDecoder phi_dec_;
  MixEncoder mix_enc_;
  MixDecoder mix_dec_;
  PerceptualPyramid psi_;
  Param* raw_w_ = nullptr;
  HierarchicalMemory memory_;
};

}  // namespace ppl
