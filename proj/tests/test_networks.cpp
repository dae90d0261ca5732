#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "ppl/model.hpp"
#include "ppl/nn.hpp"

using namespace ppl;

namespace {

ModelConfig tiny_config(int n_keypoints = 6, int resolution = 32) {
  ModelConfig cfg;
  cfg.resolution = resolution;
  cfg.n_keypoints = n_keypoints;
  cfg.memory_banks = 4;
  cfg.tokens_per_bank = 3;
  cfg.token_dim = 16;
  cfg.mixer_depth = 2;
  cfg.mixer_expansion = 2;
  cfg.enc_widths = {8, 12, 16, 20};
  cfg.dec_widths = {8, 12, 16, 20};
  cfg.prior_embed_dim = 24;
  cfg.head_hidden = 32;
  cfg.sigma_sq = 2e-3;
  return cfg;
}

Tensor random_frames(int B, int res, uint64_t seed) {
  RngStream rng(seed);
  Tensor t({B, 3, res, res});
  for (auto& v : t.v) v = static_cast<Real>(rng.next_uniform() * 2 - 1);
  return t;
}

}  // namespace

TEST_CASE("image encoder: determinism, stride arithmetic, alive output") {
  ParamStore ps;
  RngStream rng(3);
  ImageEncoder enc = ImageEncoder::make(ps, "enc", 3, {8, 12, 16, 20}, rng);
  const Tensor x = random_frames(2, 32, 7);

  Graph g;
  ps.attach(g);
  Var h1 = enc.fwd(g, g.leaf(x, false));
  Var h2 = enc.fwd(g, g.leaf(x, false));
  // Spatial dims shrink by the total stride product (4 stride-2 stages).
  CHECK(g.val(h1).shape == std::vector<int>{2, 20, 2, 2});
  for (int64_t i = 0; i < g.val(h1).numel(); ++i) CHECK(g.val(h1).v[i] == g.val(h2).v[i]);

  double mean = 0, var = 0;
  for (Real v : g.val(h1).v) mean += v;
  mean /= static_cast<double>(g.val(h1).numel());
  for (Real v : g.val(h1).v) var += std::pow(v - mean, 2);
  CHECK(var > 0.0);  // dead init would produce a constant map
  for (Real v : g.val(h1).v) CHECK(std::isfinite(static_cast<double>(v)));
}

TEST_CASE("affine head: identity at init for any keypoint count") {
  for (int N : {4, 16, 32}) {
    ParamStore ps;
    RngStream rng(5);
    AffineHead head = AffineHead::make(ps, 20, 24, 32, N, rng);
    Graph g;
    ps.attach(g);
    RngStream frng(9);
    Tensor h({2, 20}), ht({2, 24});
    for (auto& v : h.v) v = static_cast<Real>(frng.next_gaussian());
    for (auto& v : ht.v) v = static_cast<Real>(frng.next_gaussian());
    Var theta = head.fwd(g, g.leaf(h, false), g.leaf(ht, false));
    REQUIRE(g.val(theta).shape == std::vector<int>{2, N, 6});
    // Zero final weights + identity bias: every transform is exactly identity,
    // so ||Theta_i - I||_inf = 0 <= 0.1.
    for (int i = 0; i < 2 * N; ++i) {
      const Real* m = g.val(theta).data() + static_cast<int64_t>(i) * 6;
      CHECK(m[0] == doctest::Approx(1.0));
      CHECK(m[1] == doctest::Approx(0.0));
      CHECK(m[2] == doctest::Approx(0.0));
      CHECK(m[3] == doctest::Approx(0.0));
      CHECK(m[4] == doctest::Approx(1.0));
      CHECK(m[5] == doctest::Approx(0.0));
    }
    // Nonzero gradient on head parameters for a generic loss. The final
    // layer starts at zero weights, so at init the gradient shows up on
    // that layer itself (upstream layers see it after the first step).
    Var loss = mean_all(g, mul(g, theta, theta));
    g.backward(loss);
    double gsum = 0;
    for (Real v : g.grad(head.fc2.w->var).v) gsum += std::abs(static_cast<double>(v));
    CHECK(gsum > 0.0);
  }
}

TEST_CASE("mixers: shapes, determinism, jacobian rank at init") {
  const int N = 5, m = 4, d = 16;
  ParamStore ps;
  RngStream rng(11);
  MixEncoder enc = MixEncoder::make(ps, N, m, d, 2, 2, rng);
  MixDecoder dec = MixDecoder::make(ps, N, m, d, 2, 2, rng);

  Graph g;
  ps.attach(g);
  RngStream krng(13);
  Tensor kp({2, N, 2});
  for (auto& v : kp.v) v = static_cast<Real>(krng.next_gaussian() * 0.4);
  Var tokens = enc.fwd(g, g.leaf(kp, false));
  CHECK(g.val(tokens).shape == std::vector<int>{2, m, d});
  Var back = dec.fwd(g, tokens);
  CHECK(g.val(back).shape == std::vector<int>{2, N, 2});

  // Numerical jacobian of mix_encode at a random point: full column rank
  // requires d*m >= 2N; here 64 >> 10.
  const int in_dim = N * 2, out_dim = m * d;
  Eigen::MatrixXd J(out_dim, in_dim);
  const Real h = Real(1e-3);
  for (int c = 0; c < in_dim; ++c) {
    Tensor plus = kp, minus = kp;
    plus.v[c] += h;
    minus.v[c] -= h;
    Graph gp;
    ps.attach(gp);
    Var tp = enc.fwd(gp, gp.leaf(Tensor({1, N, 2}, std::vector<Real>(plus.v.begin(),
                                                                     plus.v.begin() + in_dim)),
                                 false));
    Graph gm;
    ps.attach(gm);
    Var tm = enc.fwd(gm, gm.leaf(Tensor({1, N, 2}, std::vector<Real>(minus.v.begin(),
                                                                     minus.v.begin() + in_dim)),
                                 false));
    for (int r = 0; r < out_dim; ++r)
      J(r, c) = (static_cast<double>(gp.val(tp).v[r]) - gm.val(tm).v[r]) / (2.0 * h);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
  const auto& sv = svd.singularValues();
  CHECK(sv(in_dim - 1) > 1e-6 * sv(0));  // no immediate information collapse
}

TEST_CASE("perceptual pyramid: frozen, multi-scale, zero loss on identical frames") {
  PerceptualPyramid psi = PerceptualPyramid::make(3);
  const uint64_t hash_before = psi.weight_hash();

  Graph g;
  const Tensor a = random_frames(1, 32, 21);
  const Tensor b = random_frames(1, 32, 22);
  Var va = g.leaf(a, false), vb = g.leaf(b, false);
  auto fa = psi.fwd(g, va);
  auto fb = psi.fwd(g, vb);
  REQUIRE(fa.size() == 4);  // identity level + 3 conv levels
  CHECK(g.val(fa[1]).dim(2) == 32);
  CHECK(g.val(fa[2]).dim(2) == 16);
  CHECK(g.val(fa[3]).dim(2) == 8);

  // Identical frames -> L_ir = 0 at every level.
  auto fa2 = psi.fwd(g, va);
  for (size_t l = 0; l < fa.size(); ++l) {
    Var diff = l1_mean(g, fa[l], fa2[l]);
    CHECK(g.val(diff).v[0] == 0.0);
  }
  // Distinct frames -> positive.
  double total = 0;
  for (size_t l = 0; l < fa.size(); ++l) total += g.val(l1_mean(g, fa[l], fb[l])).v[0];
  CHECK(total > 0.0);

  CHECK(psi.weight_hash() == hash_before);
}

TEST_CASE("model: full forward produces the documented shapes and finite losses") {
  ModelConfig cfg = tiny_config();
  PPLModel model(cfg, 123);
  const Tensor frames = random_frames(2, 32, 31);
  const Tensor refs = random_frames(2, 32, 32);

  Graph g;
  model.params().attach(g);
  ForwardVars fv = model.forward_with_detachments(g, frames, refs, LossWeights{});

  CHECK(g.val(fv.t_prime).shape == std::vector<int>{2, cfg.n_keypoints, 2});
  CHECK(g.val(fv.heatmap).shape == std::vector<int>{2, 1, 32, 32});
  CHECK(g.val(fv.reconstructed).shape == std::vector<int>{2, 3, 32, 32});
  CHECK(g.val(fv.tokens).shape == std::vector<int>{2, cfg.memory_banks, cfg.token_dim});
  CHECK(fv.losses.l_ir >= 0.0);
  CHECK(fv.losses.l_b >= 0.0);
  CHECK(fv.losses.l_l >= 0.0);
  CHECK(fv.losses.l_kr >= 0.0);
  CHECK(std::isfinite(fv.losses.total));
  CHECK(fv.losses.total ==
        doctest::Approx(fv.losses.l_ir + fv.losses.l_b + fv.losses.l_l + fv.losses.l_kr));

  SUBCASE("decoder output is deterministic and in range") {
    for (Real v : g.val(fv.reconstructed).v) {
      CHECK(v >= Real(-1));
      CHECK(v <= Real(1));
    }
  }
  SUBCASE("resolution mismatch is a contract violation") {
    const Tensor bad = random_frames(1, 16, 33);
    Graph g2;
    model.params().attach(g2);
    CHECK_THROWS_AS(model.forward_with_detachments(g2, bad, bad, LossWeights{}),
                    std::invalid_argument);
  }
}

TEST_CASE("model: gradient reaches the heatmap, raw W, and the affine head") {
  ModelConfig cfg = tiny_config();
  PPLModel model(cfg, 321);
  const Tensor frames = random_frames(2, 32, 41);
  const Tensor refs = random_frames(2, 32, 42);

  {
    Graph g;
    model.params().attach(g);
    ForwardVars fv = model.forward_with_detachments(g, frames, refs, LossWeights{});
    g.backward(fv.l_ir);
    auto gsum = [&](Var v) {
      double acc = 0;
      for (Real x : g.grad(v).v) acc += std::abs(static_cast<double>(x));
      return acc;
    };
    CHECK(gsum(fv.heatmap) > 0.0);  // reconstruction supervises the pose path
    CHECK(gsum(model.params().find("raw_w")->var) > 0.0);
    CHECK(gsum(model.params().find("fc_head.fc2.w")->var) > 0.0);
    // One Adam step wakes the zero-initialized head output layer...
    model.params().adam_step(g, Real(1e-3), Real(0.9), Real(0.999), Real(1e-8), 1);
  }
  {
    // ...after which gradient reaches the upstream image features.
    Graph g;
    model.params().attach(g);
    ForwardVars fv = model.forward_with_detachments(g, frames, refs, LossWeights{});
    g.backward(fv.l_ir);
    auto gsum = [&](Var v) {
      double acc = 0;
      for (Real x : g.grad(v).v) acc += std::abs(static_cast<double>(x));
      return acc;
    };
    CHECK(gsum(model.params().find("fc_head.fc1.w")->var) > 0.0);
    CHECK(gsum(model.params().find("phi_enc.conv0.w")->var) > 0.0);
    CHECK(gsum(model.params().find("prior_embed.fc1.w")->var) > 0.0);
  }
}

TEST_CASE("distill uses the shared decoder instance") {
  ModelConfig cfg = tiny_config();
  PPLModel model(cfg, 55);
  // The prior must respond to decoder parameter changes: same object, not a copy.
  const KeypointSet before = model.distill_prior();
  Param* proj = model.params().find("mix_dec.proj.b");
  REQUIRE(proj != nullptr);
  proj->value.v[0] += Real(0.25);
  const KeypointSet after = model.distill_prior();
  CHECK(after[0].x == doctest::Approx(before[0].x + 0.25).epsilon(1e-5));
  CHECK(model.distill_prior().size() == cfg.n_keypoints);
}
