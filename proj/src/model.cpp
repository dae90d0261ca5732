#include "ppl/model.hpp"

#include <stdexcept>

#include "ppl/geometry_ops.hpp"
#include "ppl/render_ops.hpp"

namespace ppl {

void ModelConfig::validate() const {
  if (resolution <= 0 || (resolution % 16) != 0)
    throw std::invalid_argument("ModelConfig: resolution must be a positive multiple of 16");
  if (n_keypoints < 2) throw std::invalid_argument("ModelConfig: need at least 2 keypoints");
  if (memory_banks <= 0 || tokens_per_bank <= 0 || token_dim <= 0)
    throw std::invalid_argument("ModelConfig: memory shape must be positive");
  if (sigma_sq <= 0) throw std::invalid_argument("ModelConfig: sigma_sq must be positive");
  if (enc_widths.size() != 4 || dec_widths.size() < 2)
    throw std::invalid_argument("ModelConfig: unexpected width lists");
}

PPLModel::PPLModel(const ModelConfig& cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  RngStream rng = named_stream(init_seed, "init");
  phi_enc_ = ImageEncoder::make(params_, "phi_enc", 3, cfg_.enc_widths, rng);
  prior_embed_ = PriorEmbedder::make(params_, cfg_.n_keypoints, cfg_.prior_embed_dim,
                                     cfg_.prior_embed_dim, rng);
  head_ = AffineHead::make(params_, phi_enc_.out_channels, cfg_.prior_embed_dim,
                           cfg_.head_hidden, cfg_.n_keypoints, rng);
  phi_dec_ = ImageDecoder::make(params_, 4, cfg_.dec_widths, rng);
  mix_enc_ = MixEncoder::make(params_, cfg_.n_keypoints, cfg_.memory_banks,
                              cfg_.token_dim, cfg_.mixer_depth, cfg_.mixer_expansion, rng);
  mix_dec_ = MixDecoder::make(params_, cfg_.n_keypoints, cfg_.memory_banks,
                              cfg_.token_dim, cfg_.mixer_depth, cfg_.mixer_expansion, rng);
  psi_ = PerceptualPyramid::make(3);
  // Positive random init; softplus keeps effective weights > 0 from step 0.
  Tensor raw = Tensor::gaussian({cfg_.n_keypoints, cfg_.n_keypoints}, rng, Real(0.1), Real(0.5));
  raw_w_ = params_.add("raw_w", std::move(raw), cfg_.link_lr_scale);
  RngStream mem_rng = named_stream(init_seed, "memory");
  memory_ = HierarchicalMemory::init(cfg_.memory_banks, cfg_.tokens_per_bank,
                                     cfg_.token_dim, mem_rng, cfg_.memory_init_std,
                                     cfg_.memory_decay);
}

KeypointSet PPLModel::distill_prior() {
  Graph g;
  params_.attach(g);
  Tensor pooled = memory_.pooled();
  Var tokens = g.leaf(TensorT<Real>({1, cfg_.memory_banks, cfg_.token_dim}, pooled.v), false);
  Var decoded = mix_dec_.fwd(g, tokens);
  return KeypointSet::from_tensor(g.val(decoded), 0);
}

TensorT<double> PPLModel::connectivity() const {
  return effective_weights(raw_w_->value.cast<double>());
}

ForwardVars PPLModel::forward_with_detachments(Graph& g, const Tensor& frames,
                                               const Tensor& refs,
                                               const LossWeights& w) {
  if (frames.ndim() != 4 || frames.dim(1) != 3)
    throw std::invalid_argument("forward: frames must be (B,3,H,W)");
  if (!frames.same_shape(refs))
    throw std::invalid_argument("forward: frame/ref shape mismatch");
  if (frames.dim(2) != cfg_.resolution || frames.dim(3) != cfg_.resolution)
    throw std::invalid_argument("forward: resolution mismatch");
  const int B = frames.dim(0);
  const int N = cfg_.n_keypoints;

  ForwardVars out;

  // The prior is re-distilled each step and enters the tape as a plain
  // leaf: the first detachment (sg on T).
  const KeypointSet prior = distill_prior();
  Var prior_var = g.leaf(prior.to_tensor<Real>(), false);

  Var frames_var = g.leaf(frames, false);
  Var refs_var = g.leaf(refs, false);

  // --- image path ---
  Var h_spatial = phi_enc_.fwd(g, frames_var);
  Var h_pooled = global_avg_pool(g, h_spatial);

  // h_T is shared across the batch; tile the flattened prior per sample.
  Tensor prior_flat({B, 2 * N});
  for (int bi = 0; bi < B; ++bi)
    for (int i = 0; i < N; ++i) {
      prior_flat.v[bi * 2 * N + 2 * i] = static_cast<Real>(prior[i].x);
      prior_flat.v[bi * 2 * N + 2 * i + 1] = static_cast<Real>(prior[i].y);
    }
  Var h_prior = prior_embed_.fwd(g, g.leaf(std::move(prior_flat), false));

  out.theta = head_.fwd(g, h_pooled, h_prior);
  out.t_prime = affine_apply(g, prior_var, out.theta);
  out.eff_w = effective_weights_op(g, raw_w_->var);
  const int hres = cfg_.heat_resolution();
  out.heatmap = render_combine_op(g, out.t_prime, out.eff_w, hres, hres,
                                  static_cast<Real>(cfg_.sigma_sq));
  Var dec_in = concat_channels(g, refs_var, out.heatmap);
  out.reconstructed = phi_dec_.fwd(g, dec_in);

  std::vector<Var> feat_rec = psi_.fwd(g, out.reconstructed);
  std::vector<Var> feat_tgt = psi_.fwd(g, frames_var);
  Var lir = l1_mean(g, feat_rec[0], feat_tgt[0]);
  for (size_t l = 1; l < feat_rec.size(); ++l)
    lir = add(g, lir, l1_mean(g, feat_rec[l], feat_tgt[l]));
  out.l_ir = lir;
  out.l_b = boundary_loss_op(g, out.t_prime);
  out.l_l = link_reg_loss_op(g, prior_var, out.t_prime, out.eff_w);

  // --- memory path: T' detached at the MIX_enc input ---
  Var t_prime_det = detach(g, out.t_prime);
  out.tokens = mix_enc_.fwd(g, t_prime_det);
  auto retrieval = memory_.retrieve(g.val(out.tokens));
  out.retrieval_indices = retrieval.indices;
  // The straight-through leaf carries requires_grad so audits can assert
  // that no gradient ever lands on the codebook values.
  out.tokens_q = g.leaf(retrieval.tokens, true);
  Var tokens_st = straight_through(g, out.tokens, out.tokens_q);
  out.t_prime_recon = mix_dec_.fwd(g, tokens_st);
  Var commit_target = g.leaf(retrieval.tokens, false);
  Var lkr = add(g, l2diff_mean(g, out.t_prime_recon, t_prime_det),
                l2diff_mean(g, out.tokens, commit_target));
  out.l_kr = lkr;

  out.total = weighted_sum(g, {out.l_ir, out.l_b, out.l_l, out.l_kr},
                           {w.ir, w.b, w.l, w.kr});

  out.losses.l_ir = g.val(out.l_ir).v[0];
  out.losses.l_b = g.val(out.l_b).v[0];
  out.losses.l_l = g.val(out.l_l).v[0];
  out.losses.l_kr = g.val(out.l_kr).v[0];
  out.losses.total = g.val(out.total).v[0];
  out.losses.weights = w;
  return out;
}

Var PPLModel::image_path_keypoints(Graph& g, Var frames_var, const KeypointSet& prior) {
  const int B = g.val(frames_var).dim(0);
  const int N = cfg_.n_keypoints;
  Var h_pooled = global_avg_pool(g, phi_enc_.fwd(g, frames_var));
  Tensor prior_flat({B, 2 * N});
  for (int bi = 0; bi < B; ++bi)
    for (int i = 0; i < N; ++i) {
      prior_flat.v[bi * 2 * N + 2 * i] = static_cast<Real>(prior[i].x);
      prior_flat.v[bi * 2 * N + 2 * i + 1] = static_cast<Real>(prior[i].y);
    }
  Var h_prior = prior_embed_.fwd(g, g.leaf(std::move(prior_flat), false));
  Var theta = head_.fwd(g, h_pooled, h_prior);
  Var prior_var = g.leaf(prior.to_tensor<Real>(), false);
  return affine_apply(g, prior_var, theta);
}

Tensor PPLModel::estimate_keypoints(const Tensor& frames) {
  Graph g;
  params_.attach(g);
  Var frames_var = g.leaf(frames, false);
  const KeypointSet prior = distill_prior();
  Var t_prime = image_path_keypoints(g, frames_var, prior);
  return g.val(t_prime);
}

Tensor PPLModel::refine_keypoints(const Tensor& t_prime) {
  Graph g;
  params_.attach(g);
  Var kp = g.leaf(t_prime, false);
  Var tokens = mix_enc_.fwd(g, kp);
  auto retrieval = memory_.retrieve(g.val(tokens));
  Var tokens_q = g.leaf(retrieval.tokens, false);
  Var recon = mix_dec_.fwd(g, tokens_q);
  return g.val(recon);
}

Tensor PPLModel::render_heatmap(const Tensor& keypoints) {
  const int B = keypoints.dim(0);
  const int N = keypoints.dim(1);
  const int hres = cfg_.heat_resolution();
  TensorT<double> eff = connectivity();
  Tensor eff_r = eff.cast<Real>();
  Tensor out({B, 1, hres, hres});
  const int64_t npix = static_cast<int64_t>(hres) * hres;
  for (int bi = 0; bi < B; ++bi)
    render_combined_forward<Real>(keypoints.data() + static_cast<int64_t>(bi) * N * 2,
                                  N, eff_r.data(), hres, hres,
                                  static_cast<Real>(cfg_.sigma_sq),
                                  out.data() + bi * npix, nullptr);
  return out;
}

Tensor PPLModel::decode_frames(const Tensor& refs, const Tensor& heatmap) {
  Graph g;
  params_.attach(g);
  Var dec_in = concat_channels(g, g.leaf(refs, false), g.leaf(heatmap, false));
  Var rec = phi_dec_.fwd(g, dec_in);
  return g.val(rec);
}

const std::vector<std::string>& PPLModel::group_names() {
  static const std::vector<std::string> names = {
      "phi_enc", "fc_head", "phi_dec", "mix_enc", "mix_dec", "prior_embed", "raw_w"};
  return names;
}

std::vector<Param*> PPLModel::group(const std::string& name) const {
  std::vector<Param*> out;
  for (const auto& p : params_.all()) {
    if (p->name.rfind(name, 0) == 0) out.push_back(p.get());
  }
  return out;
}

}  // namespace ppl
