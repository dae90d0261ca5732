#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ppl/graph.hpp"
#include "ppl/nn_ops.hpp"
#include "ppl/rng.hpp"

namespace ppl {

// Named trainable parameter with Adam state. A fresh tape leaf is attached
// per step; gradients are read back from the graph after backward().
struct Param {
  std::string name;
  Tensor value;
  Tensor adam_m;
  Tensor adam_v;
  Real lr_scale = Real(1);
  Var var;  // valid between attach() and the end of the step

  Param(std::string n, Tensor init, Real scale)
      : name(std::move(n)),
        value(std::move(init)),
        adam_m(Tensor::zeros(value.shape)),
        adam_v(Tensor::zeros(value.shape)),
        lr_scale(scale) {}
};

class ParamStore {
 public:
  Param* add(std::string name, Tensor init, Real lr_scale = Real(1));
  Param* find(const std::string& name) const;
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

  void attach(Graph& g);
  // Bias-corrected Adam over all parameters holding a graph leaf.
  void adam_step(Graph& g, Real lr, Real beta1, Real beta2, Real eps, int64_t t);

  int64_t count_scalars() const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

// --- layers ---

struct Conv2dLayer {
  Param* w = nullptr;
  Param* b = nullptr;
  int stride = 1;
  int pad = 1;

  static Conv2dLayer make(ParamStore& ps, const std::string& name, int in_ch,
                          int out_ch, int ksize, int stride, int pad,
                          RngStream& rng);
  Var fwd(Graph& g, Var x) const { return conv2d(g, x, w->var, b->var, stride, pad); }
};

struct DenseLayer {
  Param* w = nullptr;
  Param* b = nullptr;

  static DenseLayer make(ParamStore& ps, const std::string& name, int in_dim,
                         int out_dim, RngStream& rng, double w_std = -1.0);
  Var fwd(Graph& g, Var x) const { return linear(g, x, w->var, b->var); }
};

struct LayerNormLayer {
  Param* gain = nullptr;
  Param* bias = nullptr;

  static LayerNormLayer make(ParamStore& ps, const std::string& name, int dim);
  Var fwd(Graph& g, Var x) const { return layer_norm(g, x, gain->var, bias->var); }
};

// Pre-norm MLP-Mixer block: token-mixing then channel-mixing, residual both.
struct MixerBlock {
  int tokens = 0;
  int channels = 0;
  LayerNormLayer ln_token, ln_channel;
  Param *tok_w1, *tok_b1, *tok_w2, *tok_b2;
  Param *ch_w1, *ch_b1, *ch_w2, *ch_b2;

  static MixerBlock make(ParamStore& ps, const std::string& name, int tokens,
                         int channels, int expansion, RngStream& rng);
  Var fwd(Graph& g, Var x) const;
};

// (B,N,2) keypoints -> (B,m,d) tokens.
struct MixEncoder {
  int n_keypoints = 0, n_banks = 0, dim = 0;
  Param *lift_w, *lift_b;
  std::vector<MixerBlock> blocks;
  Param *map_w, *map_b;

  static MixEncoder make(ParamStore& ps, int n, int m, int d, int depth,
                         int expansion, RngStream& rng);
  Var fwd(Graph& g, Var keypoints) const;
};

// (B,m,d) tokens -> (B,N,2) keypoints. Shared by keypoint reconstruction
// and prior distillation.
struct MixDecoder {
  int n_keypoints = 0, n_banks = 0, dim = 0;
  Param *map_w, *map_b;
  std::vector<MixerBlock> blocks;
  Param *proj_w, *proj_b;

  static MixDecoder make(ParamStore& ps, int n, int m, int d, int depth,
                         int expansion, RngStream& rng);
  Var fwd(Graph& g, Var tokens) const;
};

// 4-stage stride-2 CNN; returns the spatial grid, pooled form via
// global_avg_pool at the call site.
struct ImageEncoder {
  std::vector<Conv2dLayer> convs;
  int out_channels = 0;

  static ImageEncoder make(ParamStore& ps, const std::string& name, int in_ch,
                           const std::vector<int>& widths, RngStream& rng);
  Var fwd(Graph& g, Var img) const;
};

// Keypoint prior -> embedding h_T (two dense layers).
struct PriorEmbedder {
  DenseLayer fc1, fc2;
  int out_dim = 0;

  static PriorEmbedder make(ParamStore& ps, int n_keypoints, int hidden,
                            int out_dim, RngStream& rng);
  Var fwd(Graph& g, Var prior_flat) const;  // (B, 2N) -> (B, out_dim)
};

// concat(h_I, h_T) -> per-keypoint affine parameters (B,N,6). The final
// layer starts at exactly the identity transform (zero weights, identity
// bias) so training begins from "prior unchanged".
struct AffineHead {
  DenseLayer fc1, fc2;
  int n_keypoints = 0;

  static AffineHead make(ParamStore& ps, int feat_dim, int embed_dim,
                         int hidden, int n_keypoints, RngStream& rng);
  Var fwd(Graph& g, Var h_img, Var h_prior) const;
};

// U-shaped decoder over concat(I_ref, S); skip connections at every scale
// plus the raw input at full resolution. tanh output in [-1, 1].
struct ImageDecoder {
  std::vector<Conv2dLayer> enc;   // stride-2 path
  std::vector<Conv2dLayer> dec;   // conv after upsample+skip
  Conv2dLayer out_conv;

  static ImageDecoder make(ParamStore& ps, int in_ch,
                           const std::vector<int>& widths, RngStream& rng);
  Var fwd(Graph& g, Var x) const;
};

// Frozen multi-scale feature extractor for the perceptual loss. Level 0 is
// the image itself; deeper levels are fixed random convolutions (tanh) at
// increasing stride. Weights come from a fixed internal seed so every run
// shares the same extractor, and they never join the optimizer.
struct PerceptualPyramid {
  std::vector<Tensor> ws;
  std::vector<Tensor> bs;
  int levels = 3;

  static PerceptualPyramid make(int in_ch = 3);
  std::vector<Var> fwd(Graph& g, Var img) const;
  // Parameter fingerprint; must not change across a training run.
  uint64_t weight_hash() const;
};

}  // namespace ppl
