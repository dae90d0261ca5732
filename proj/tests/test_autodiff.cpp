#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "ppl/nn_ops.hpp"

using namespace ppl;
using ppl::testing::grad_check;
using ppl::testing::random_tensor;

namespace {

using DGraph = GraphT<double>;
using DTensor = TensorT<double>;

}  // namespace

TEST_CASE("elementwise ops: values and gradients") {
  RngStream rng(1);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({3, 4}, rng);

  SUBCASE("add") {
    CHECK(grad_check({a, b}, [](DGraph& g, const std::vector<Var>& v) {
            return sum_all(g, add(g, v[0], v[1]));
          }) < 1e-6);
  }
  SUBCASE("sub/mul") {
    CHECK(grad_check({a, b}, [](DGraph& g, const std::vector<Var>& v) {
            return sum_all(g, mul(g, sub(g, v[0], v[1]), v[1]));
          }) < 1e-6);
  }
  SUBCASE("scale and mean") {
    CHECK(grad_check({a}, [](DGraph& g, const std::vector<Var>& v) {
            return mean_all(g, scale(g, v[0], 2.5));
          }) < 1e-6);
  }
  SUBCASE("activations") {
    // Away from the relu kink by construction of the random draw.
    for (auto act : {0, 1, 2, 3}) {
      const double err = grad_check({a}, [act](DGraph& g, const std::vector<Var>& v) {
        Var h = act == 0   ? relu(g, v[0])
                : act == 1 ? gelu(g, v[0])
                : act == 2 ? tanh_op(g, v[0])
                           : softplus(g, v[0]);
        return sum_all(g, mul(g, h, h));
      });
      CAPTURE(act);
      CHECK(err < 1e-5);
    }
  }
}

TEST_CASE("graph reuse: diamond dependencies accumulate") {
  DGraph g;
  Var x = g.leaf(DTensor({2}, {1.0, 2.0}), true);
  Var y = add(g, x, x);            // 2x
  Var z = sum_all(g, mul(g, y, x));  // sum(2x^2), d/dx = 4x
  g.backward(z);
  CHECK(g.grad(x).v[0] == doctest::Approx(4.0));
  CHECK(g.grad(x).v[1] == doctest::Approx(8.0));
}

TEST_CASE("l1_mean and l2diff_mean") {
  RngStream rng(2);
  auto a = random_tensor({4, 5}, rng);
  auto b = random_tensor({4, 5}, rng);

  DGraph g;
  Var va = g.leaf(a, false), vb = g.leaf(b, false);
  double expect = 0;
  for (int i = 0; i < 20; ++i) expect += std::abs(a.v[i] - b.v[i]);
  expect /= 20;
  CHECK(g.val(l1_mean(g, va, vb)).v[0] == doctest::Approx(expect).epsilon(1e-12));

  CHECK(grad_check({a, b}, [](DGraph& gg, const std::vector<Var>& v) {
          return l1_mean(gg, v[0], v[1]);
        }) < 1e-5);
  CHECK(grad_check({a, b}, [](DGraph& gg, const std::vector<Var>& v) {
          return l2diff_mean(gg, v[0], v[1]);
        }) < 1e-5);

  // Exact zero at coincidence.
  DGraph g2;
  Var same = g2.leaf(a, false);
  Var same2 = g2.leaf(a, false);
  CHECK(g2.val(l2diff_mean(g2, same, same2)).v[0] == 0.0);
}

TEST_CASE("straight_through: forward quantized, backward identity Jacobian") {
  RngStream rng(3);
  auto x = random_tensor({2, 6}, rng);
  auto q = random_tensor({2, 6}, rng);

  DGraph g;
  Var vx = g.leaf(x, true);
  Var vq = g.leaf(q, true);
  Var st = straight_through(g, vx, vq);
  for (int64_t i = 0; i < 12; ++i) CHECK(g.val(st).v[i] == q.v[i]);

  // Random cotangent c: backward of <st, c> must land c on x and 0 on q.
  auto c = random_tensor({2, 6}, rng);
  Var vc = g.leaf(c, false);
  Var loss = sum_all(g, mul(g, st, vc));
  g.backward(loss);
  for (int64_t i = 0; i < 12; ++i) {
    CHECK(g.grad(vx).v[i] == doctest::Approx(c.v[i]).epsilon(1e-12));
    CHECK(g.grad(vq).v[i] == 0.0);
  }
}

TEST_CASE("detach blocks gradient") {
  DGraph g;
  Var x = g.leaf(DTensor({2}, {3.0, -1.0}), true);
  Var d = detach(g, x);
  Var loss = sum_all(g, mul(g, d, d));
  g.backward(loss);
  CHECK(g.grad(x).v[0] == 0.0);
  CHECK(g.grad(x).v[1] == 0.0);
  CHECK_FALSE(g.requires_grad(d));
}

TEST_CASE("linear: value against explicit loops, gradients") {
  RngStream rng(4);
  auto x = random_tensor({3, 5}, rng);
  auto w = random_tensor({4, 5}, rng);
  auto b = random_tensor({4}, rng);

  DGraph g;
  Var y = linear(g, g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
  for (int r = 0; r < 3; ++r)
    for (int o = 0; o < 4; ++o) {
      double expect = b.v[o];
      for (int f = 0; f < 5; ++f) expect += x.v[r * 5 + f] * w.v[o * 5 + f];
      CHECK(g.val(y).v[r * 4 + o] == doctest::Approx(expect).epsilon(1e-12));
    }

  CHECK(grad_check({x, w, b}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = linear(gg, v[0], v[1], v[2]);
          return mean_all(gg, mul(gg, h, h));
        }) < 1e-5);
}

TEST_CASE("linear applies to trailing dim of 3D input") {
  RngStream rng(5);
  auto x = random_tensor({2, 3, 5}, rng);
  auto w = random_tensor({4, 5}, rng);
  auto b = random_tensor({4}, rng);
  DGraph g;
  Var y = linear(g, g.leaf(x, false), g.leaf(w, false), g.leaf(b, false));
  CHECK(g.val(y).shape == std::vector<int>{2, 3, 4});
}

TEST_CASE("token_linear: mixes across token axis") {
  RngStream rng(6);
  auto x = random_tensor({2, 3, 4}, rng);  // (B,T,C)
  auto a = random_tensor({5, 3}, rng);     // (U,T)
  auto b = random_tensor({5}, rng);

  DGraph g;
  Var y = token_linear(g, g.leaf(x, false), g.leaf(a, false), g.leaf(b, false));
  CHECK(g.val(y).shape == std::vector<int>{2, 5, 4});
  // Spot value.
  double expect = b.v[1];
  for (int t = 0; t < 3; ++t) expect += a.v[1 * 3 + t] * x.v[(0 * 3 + t) * 4 + 2];
  CHECK(g.val(y).v[(0 * 5 + 1) * 4 + 2] == doctest::Approx(expect).epsilon(1e-12));

  CHECK(grad_check({x, a, b}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = token_linear(gg, v[0], v[1], v[2]);
          return mean_all(gg, mul(gg, h, h));
        }) < 1e-5);
}

TEST_CASE("layer_norm: normalized rows, gradients") {
  RngStream rng(7);
  auto x = random_tensor({3, 4, 6}, rng, 2.0);
  auto gamma = random_tensor({6}, rng);
  auto beta = random_tensor({6}, rng);

  DGraph g;
  Var y = layer_norm(g, g.leaf(x, false), g.leaf(DTensor::full({6}, 1.0), false),
                     g.leaf(DTensor::zeros({6}), false));
  // Each row ~ zero mean unit variance.
  for (int r = 0; r < 12; ++r) {
    double mu = 0, var = 0;
    for (int c = 0; c < 6; ++c) mu += g.val(y).v[r * 6 + c];
    mu /= 6;
    for (int c = 0; c < 6; ++c) var += std::pow(g.val(y).v[r * 6 + c] - mu, 2);
    var /= 6;
    CHECK(std::abs(mu) < 1e-10);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  CHECK(grad_check({x, gamma, beta}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = layer_norm(gg, v[0], v[1], v[2]);
          return mean_all(gg, mul(gg, h, h));
        }, 1e-5) < 1e-4);
}

namespace {

// Direct convolution reference.
DTensor conv_ref(const DTensor& x, const DTensor& w, const DTensor& b, int stride, int pad) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int OH = (H + 2 * pad - kh) / stride + 1;
  const int OW = (W + 2 * pad - kw) / stride + 1;
  DTensor out({B, O, OH, OW});
  for (int bi = 0; bi < B; ++bi)
    for (int o = 0; o < O; ++o)
      for (int oy = 0; oy < OH; ++oy)
        for (int ox = 0; ox < OW; ++ox) {
          double acc = b.v[o];
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < kh; ++ky)
              for (int kx = 0; kx < kw; ++kx) {
                const int iy = oy * stride - pad + ky;
                const int ix = ox * stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += x.v[((bi * C + c) * H + iy) * W + ix] *
                       w.v[((o * C + c) * kh + ky) * kw + kx];
              }
          out.v[((bi * O + o) * OH + oy) * OW + ox] = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("conv2d matches direct convolution and gradients check out") {
  RngStream rng(8);
  for (int stride : {1, 2}) {
    auto x = random_tensor({2, 3, 6, 6}, rng);
    auto w = random_tensor({4, 3, 3, 3}, rng);
    auto b = random_tensor({4}, rng);

    DGraph g;
    Var y = conv2d(g, g.leaf(x, false), g.leaf(w, false), g.leaf(b, false), stride, 1);
    const DTensor ref = conv_ref(x, w, b, stride, 1);
    REQUIRE(g.val(y).shape == ref.shape);
    for (int64_t i = 0; i < ref.numel(); ++i)
      CHECK(g.val(y).v[i] == doctest::Approx(ref.v[i]).epsilon(1e-10));

    CHECK(grad_check({x, w, b}, [stride](DGraph& gg, const std::vector<Var>& v) {
            Var h = conv2d(gg, v[0], v[1], v[2], stride, 1);
            return mean_all(gg, mul(gg, h, h));
          }, 1e-4, 3) < 1e-4);
  }
}

TEST_CASE("upsample2x and global_avg_pool") {
  RngStream rng(9);
  auto x = random_tensor({2, 3, 4, 4}, rng);
  DGraph g;
  Var up = upsample2x(g, g.leaf(x, false));
  CHECK(g.val(up).shape == std::vector<int>{2, 3, 8, 8});
  CHECK(g.val(up).v[0] == x.v[0]);
  CHECK(g.val(up).v[1] == x.v[0]);

  CHECK(grad_check({x}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = upsample2x(gg, v[0]);
          return mean_all(gg, mul(gg, h, h));
        }) < 1e-5);
  CHECK(grad_check({x}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = global_avg_pool(gg, v[0]);
          return sum_all(gg, mul(gg, h, h));
        }) < 1e-5);
}

TEST_CASE("concat ops route gradients to the right halves") {
  RngStream rng(10);
  auto a = random_tensor({2, 2, 3, 3}, rng);
  auto b = random_tensor({2, 1, 3, 3}, rng);
  CHECK(grad_check({a, b}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = concat_channels(gg, v[0], v[1]);
          return mean_all(gg, mul(gg, h, h));
        }) < 1e-5);

  auto fa = random_tensor({3, 4}, rng);
  auto fb = random_tensor({3, 2}, rng);
  CHECK(grad_check({fa, fb}, [](DGraph& gg, const std::vector<Var>& v) {
          Var h = concat_features(gg, v[0], v[1]);
          return mean_all(gg, mul(gg, h, h));
        }) < 1e-5);
}

TEST_CASE("weighted_sum") {
  DGraph g;
  Var a = g.leaf(DTensor({1}, {2.0}), true);
  Var b = g.leaf(DTensor({1}, {3.0}), true);
  Var t = weighted_sum(g, {a, b}, {0.5, 2.0});
  CHECK(g.val(t).v[0] == doctest::Approx(7.0));
  g.backward(t);
  CHECK(g.grad(a).v[0] == doctest::Approx(0.5));
  CHECK(g.grad(b).v[0] == doctest::Approx(2.0));
}
