#include "ppl/nn.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace ppl {

Param* ParamStore::add(std::string name, Tensor init, Real lr_scale) {
  if (find(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  params_.push_back(std::make_unique<Param>(std::move(name), std::move(init), lr_scale));
  return params_.back().get();
}

Param* ParamStore::find(const std::string& name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::attach(Graph& g) {
  for (auto& p : params_) p->var = g.leaf(p->value, true);
}

void ParamStore::adam_step(Graph& g, Real lr, Real beta1, Real beta2, Real eps,
                           int64_t t) {
  const Real bc1 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta1), static_cast<double>(t)));
  const Real bc2 = Real(1) - static_cast<Real>(std::pow(static_cast<double>(beta2), static_cast<double>(t)));
  for (auto& p : params_) {
    if (!p->var.valid()) continue;
    const Tensor& grad = g.grad(p->var);
    const Real plr = lr * p->lr_scale;
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      const Real gi = grad.v[i];
      p->adam_m.v[i] = beta1 * p->adam_m.v[i] + (Real(1) - beta1) * gi;
      p->adam_v.v[i] = beta2 * p->adam_v.v[i] + (Real(1) - beta2) * gi * gi;
      const Real mhat = p->adam_m.v[i] / bc1;
      const Real vhat = p->adam_v.v[i] / bc2;
      p->value.v[i] -= plr * mhat / (static_cast<Real>(std::sqrt(static_cast<double>(vhat))) + eps);
    }
  }
}

int64_t ParamStore::count_scalars() const {
  int64_t n = 0;
  for (const auto& p : params_) n += p->value.numel();
  return n;
}

// --- layers ---

Conv2dLayer Conv2dLayer::make(ParamStore& ps, const std::string& name, int in_ch,
                              int out_ch, int ksize, int stride, int pad,
                              RngStream& rng) {
  Conv2dLayer l;
  const double std = std::sqrt(2.0 / (in_ch * ksize * ksize));  // He init
  l.w = ps.add(name + ".w",
               Tensor::gaussian({out_ch, in_ch, ksize, ksize}, rng, static_cast<Real>(std)));
  l.b = ps.add(name + ".b", Tensor::zeros({out_ch}));
  l.stride = stride;
  l.pad = pad;
  return l;
}

DenseLayer DenseLayer::make(ParamStore& ps, const std::string& name, int in_dim,
                            int out_dim, RngStream& rng, double w_std) {
  DenseLayer l;
  const double std = w_std >= 0.0 ? w_std : std::sqrt(2.0 / in_dim);
  l.w = ps.add(name + ".w", Tensor::gaussian({out_dim, in_dim}, rng, static_cast<Real>(std)));
  l.b = ps.add(name + ".b", Tensor::zeros({out_dim}));
  return l;
}

LayerNormLayer LayerNormLayer::make(ParamStore& ps, const std::string& name, int dim) {
  LayerNormLayer l;
  l.gain = ps.add(name + ".g", Tensor::full({dim}, Real(1)));
  l.bias = ps.add(name + ".b", Tensor::zeros({dim}));
  return l;
}

MixerBlock MixerBlock::make(ParamStore& ps, const std::string& name, int tokens,
                            int channels, int expansion, RngStream& rng) {
  MixerBlock blk;
  blk.tokens = tokens;
  blk.channels = channels;
  blk.ln_token = LayerNormLayer::make(ps, name + ".ln_tok", channels);
  blk.ln_channel = LayerNormLayer::make(ps, name + ".ln_ch", channels);
  const int ht = tokens * expansion;
  const int hc = channels * expansion;
  const auto std_t1 = static_cast<Real>(std::sqrt(1.0 / tokens));
  const auto std_t2 = static_cast<Real>(std::sqrt(1.0 / ht));
  const auto std_c1 = static_cast<Real>(std::sqrt(1.0 / channels));
  const auto std_c2 = static_cast<Real>(std::sqrt(1.0 / hc));
  blk.tok_w1 = ps.add(name + ".tok_w1", Tensor::gaussian({ht, tokens}, rng, std_t1));
  blk.tok_b1 = ps.add(name + ".tok_b1", Tensor::zeros({ht}));
  blk.tok_w2 = ps.add(name + ".tok_w2", Tensor::gaussian({tokens, ht}, rng, std_t2));
  blk.tok_b2 = ps.add(name + ".tok_b2", Tensor::zeros({tokens}));
  blk.ch_w1 = ps.add(name + ".ch_w1", Tensor::gaussian({hc, channels}, rng, std_c1));
  blk.ch_b1 = ps.add(name + ".ch_b1", Tensor::zeros({hc}));
  blk.ch_w2 = ps.add(name + ".ch_w2", Tensor::gaussian({channels, hc}, rng, std_c2));
  blk.ch_b2 = ps.add(name + ".ch_b2", Tensor::zeros({channels}));
  return blk;
}

Var MixerBlock::fwd(Graph& g, Var x) const {
  // Token mixing.
  Var h = ln_token.fwd(g, x);
  h = token_linear(g, h, tok_w1->var, tok_b1->var);
  h = gelu(g, h);
  h = token_linear(g, h, tok_w2->var, tok_b2->var);
  x = add(g, x, h);
  // Channel mixing.
  h = ln_channel.fwd(g, x);
  h = linear(g, h, ch_w1->var, ch_b1->var);
  h = gelu(g, h);
  h = linear(g, h, ch_w2->var, ch_b2->var);
  return add(g, x, h);
}

MixEncoder MixEncoder::make(ParamStore& ps, int n, int m, int d, int depth,
                            int expansion, RngStream& rng) {
  MixEncoder enc;
  enc.n_keypoints = n;
  enc.n_banks = m;
  enc.dim = d;
  enc.lift_w = ps.add("mix_enc.lift.w",
                      Tensor::gaussian({d, 2}, rng, static_cast<Real>(std::sqrt(1.0 / 2))));
  enc.lift_b = ps.add("mix_enc.lift.b", Tensor::zeros({d}));
  for (int i = 0; i < depth; ++i)
    enc.blocks.push_back(MixerBlock::make(ps, "mix_enc.blk" + std::to_string(i), n, d,
                                          expansion, rng));
  enc.map_w = ps.add("mix_enc.map.w",
                     Tensor::gaussian({m, n}, rng, static_cast<Real>(std::sqrt(1.0 / n))));
  enc.map_b = ps.add("mix_enc.map.b", Tensor::zeros({m}));
  return enc;
}

Var MixEncoder::fwd(Graph& g, Var keypoints) const {
  const auto& kv = g.val(keypoints);
  if (kv.ndim() != 3 || kv.dim(1) != n_keypoints || kv.dim(2) != 2)
    throw std::invalid_argument("MixEncoder: expects (B,N,2)");
  Var h = linear(g, keypoints, lift_w->var, lift_b->var);  // (B,N,d)
  for (const auto& blk : blocks) h = blk.fwd(g, h);
  return token_linear(g, h, map_w->var, map_b->var);  // (B,m,d)
}

MixDecoder MixDecoder::make(ParamStore& ps, int n, int m, int d, int depth,
                            int expansion, RngStream& rng) {
  MixDecoder dec;
  dec.n_keypoints = n;
  dec.n_banks = m;
  dec.dim = d;
  dec.map_w = ps.add("mix_dec.map.w",
                     Tensor::gaussian({n, m}, rng, static_cast<Real>(std::sqrt(1.0 / m))));
  dec.map_b = ps.add("mix_dec.map.b", Tensor::zeros({n}));
  for (int i = 0; i < depth; ++i)
    dec.blocks.push_back(MixerBlock::make(ps, "mix_dec.blk" + std::to_string(i), n, d,
                                          expansion, rng));
  // Spread the decoded points at init so the initial prior is not a single
  // cluster at the origin.
  dec.proj_w = ps.add("mix_dec.proj.w",
                      Tensor::gaussian({2, d}, rng, static_cast<Real>(0.5 / std::sqrt(d))));
  dec.proj_b = ps.add("mix_dec.proj.b", Tensor::zeros({2}));
  return dec;
}

Var MixDecoder::fwd(Graph& g, Var tokens) const {
  const auto& tv = g.val(tokens);
  if (tv.ndim() != 3 || tv.dim(1) != n_banks || tv.dim(2) != dim)
    throw std::invalid_argument("MixDecoder: expects (B,m,d)");
  Var h = token_linear(g, tokens, map_w->var, map_b->var);  // (B,N,d)
  for (const auto& blk : blocks) h = blk.fwd(g, h);
  return linear(g, h, proj_w->var, proj_b->var);  // (B,N,2)
}

ImageEncoder ImageEncoder::make(ParamStore& ps, const std::string& name, int in_ch,
                                const std::vector<int>& widths, RngStream& rng) {
  ImageEncoder enc;
  int c = in_ch;
  for (size_t i = 0; i < widths.size(); ++i) {
    enc.convs.push_back(Conv2dLayer::make(ps, name + ".conv" + std::to_string(i), c,
                                          widths[i], 3, 2, 1, rng));
    c = widths[i];
  }
  enc.out_channels = c;
  return enc;
}

Var ImageEncoder::fwd(Graph& g, Var img) const {
  Var h = img;
  for (const auto& conv : convs) h = relu(g, conv.fwd(g, h));
  return h;
}

PriorEmbedder PriorEmbedder::make(ParamStore& ps, int n_keypoints, int hidden,
                                  int out_dim, RngStream& rng) {
  PriorEmbedder pe;
  pe.fc1 = DenseLayer::make(ps, "prior_embed.fc1", 2 * n_keypoints, hidden, rng);
  pe.fc2 = DenseLayer::make(ps, "prior_embed.fc2", hidden, out_dim, rng);
  pe.out_dim = out_dim;
  return pe;
}

Var PriorEmbedder::fwd(Graph& g, Var prior_flat) const {
  return fc2.fwd(g, relu(g, fc1.fwd(g, prior_flat)));
}

AffineHead AffineHead::make(ParamStore& ps, int feat_dim, int embed_dim,
                            int hidden, int n_keypoints, RngStream& rng) {
  AffineHead head;
  head.n_keypoints = n_keypoints;
  head.fc1 = DenseLayer::make(ps, "fc_head.fc1", feat_dim + embed_dim, hidden, rng);
  head.fc2 = DenseLayer::make(ps, "fc_head.fc2", hidden, 6 * n_keypoints, rng, 0.0);
  // Identity-transform bias: rows (a,b,tx,c,d,ty) = (1,0,0,0,1,0).
  Tensor& bias = head.fc2.b->value;
  for (int i = 0; i < n_keypoints; ++i) {
    bias.v[6 * i + 0] = Real(1);
    bias.v[6 * i + 4] = Real(1);
  }
  return head;
}

Var AffineHead::fwd(Graph& g, Var h_img, Var h_prior) const {
  Var h = concat_features(g, h_img, h_prior);
  h = relu(g, fc1.fwd(g, h));
  h = fc2.fwd(g, h);
  const int B = g.val(h).dim(0);
  return reshape(g, h, {B, n_keypoints, 6});
}

ImageDecoder ImageDecoder::make(ParamStore& ps, int in_ch,
                                const std::vector<int>& widths, RngStream& rng) {
  if (widths.size() < 2)
    throw std::invalid_argument("ImageDecoder: need at least 2 scales");
  ImageDecoder dec;
  int c = in_ch;
  for (size_t i = 0; i < widths.size(); ++i) {
    dec.enc.push_back(Conv2dLayer::make(ps, "phi_dec.enc" + std::to_string(i), c,
                                        widths[i], 3, 2, 1, rng));
    c = widths[i];
  }
  // Up path: concat the encoder activation of the matching scale, then the
  // raw input at full resolution.
  for (int i = static_cast<int>(widths.size()) - 2; i >= 0; --i) {
    dec.dec.push_back(Conv2dLayer::make(ps, "phi_dec.dec" + std::to_string(i),
                                        c + widths[static_cast<size_t>(i)],
                                        widths[static_cast<size_t>(i)], 3, 1, 1, rng));
    c = widths[static_cast<size_t>(i)];
  }
  dec.dec.push_back(Conv2dLayer::make(ps, "phi_dec.dec_full", c + in_ch, widths[0], 3, 1, 1, rng));
  dec.out_conv = Conv2dLayer::make(ps, "phi_dec.out", widths[0], 3, 3, 1, 1, rng);
  return dec;
}

Var ImageDecoder::fwd(Graph& g, Var x) const {
  std::vector<Var> skips;
  Var h = x;
  for (const auto& conv : enc) {
    h = relu(g, conv.fwd(g, h));
    skips.push_back(h);
  }
  for (size_t i = 0; i < dec.size() - 1; ++i) {
    h = upsample2x(g, h);
    const size_t skip_idx = enc.size() - 2 - i;
    h = concat_channels(g, h, skips[skip_idx]);
    h = relu(g, dec[i].fwd(g, h));
  }
  h = upsample2x(g, h);
  h = concat_channels(g, h, x);
  h = relu(g, dec.back().fwd(g, h));
  return tanh_op(g, out_conv.fwd(g, h));
}

PerceptualPyramid PerceptualPyramid::make(int in_ch) {
  PerceptualPyramid psi;
  RngStream rng(0x70534950u);  // fixed extractor seed, independent of run seeds
  const std::vector<int> widths = {8, 16, 32};
  int c = in_ch;
  for (int w : widths) {
    const double std = std::sqrt(2.0 / (c * 9));
    psi.ws.push_back(Tensor::gaussian({w, c, 3, 3}, rng, static_cast<Real>(std)));
    psi.bs.push_back(Tensor::zeros({w}));
    c = w;
  }
  psi.levels = static_cast<int>(widths.size());
  return psi;
}

std::vector<Var> PerceptualPyramid::fwd(Graph& g, Var img) const {
  std::vector<Var> feats;
  feats.push_back(img);  // level 0: the image itself
  Var h = img;
  for (int l = 0; l < levels; ++l) {
    Var w = g.leaf(ws[static_cast<size_t>(l)], false);
    Var b = g.leaf(bs[static_cast<size_t>(l)], false);
    const int stride = l == 0 ? 1 : 2;
    h = tanh_op(g, conv2d(g, h, w, b, stride, 1));
    feats.push_back(h);
  }
  return feats;
}

uint64_t PerceptualPyramid::weight_hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const Tensor& t) {
    for (Real v : t.v) {
      uint32_t bits;
      static_assert(sizeof(Real) == sizeof(uint32_t));
      std::memcpy(&bits, &v, sizeof(bits));
      h ^= bits;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& t : ws) mix(t);
  for (const auto& t : bs) mix(t);
  return h;
}

}  // namespace ppl
