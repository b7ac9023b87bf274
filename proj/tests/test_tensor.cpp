#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>

#include "swidernet/tensor.hpp"

using namespace swidernet;

namespace {

Tensor rand_tensor(int n, int c, int h, int w, std::mt19937& rng) {
  Tensor t(n, c, h, w);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  for (auto& v : t.data) v = dist(rng);
  return t;
}

// Independent reference: dense convolution over an explicitly zero-padded
// input, with atrous kernels realized by zero-insertion into the weights.
Tensor conv2d_oracle(const Tensor& x, const ConvKernel& k) {
  const int ekh = k.rate * (k.kh() - 1) + 1;  // effective kernel extent
  const int ekw = k.rate * (k.kw() - 1) + 1;
  Tensor ew(k.weights.n, k.weights.c, ekh, ekw);
  for (int o = 0; o < k.weights.n; ++o)
    for (int ci = 0; ci < k.weights.c; ++ci)
      for (int ky = 0; ky < k.kh(); ++ky)
        for (int kx = 0; kx < k.kw(); ++kx)
          ew.at(o, ci, ky * k.rate, kx * k.rate) = k.weights.at(o, ci, ky, kx);

  const int ph = x.h + 2 * k.pad_h, pw = x.w + 2 * k.pad_w;
  Tensor padded(x.n, x.c, ph, pw);
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      for (int y = 0; y < x.h; ++y)
        for (int xx = 0; xx < x.w; ++xx)
          padded.at(b, c, y + k.pad_h, xx + k.pad_w) = x.at(b, c, y, xx);

  const int oh = (ph - ekh) / k.stride + 1;
  const int ow = (pw - ekw) / k.stride + 1;
  const int ocg = k.weights.n / k.groups;
  const int icg = k.weights.c;
  Tensor out(x.n, k.weights.n, oh, ow);
  for (int b = 0; b < x.n; ++b)
    for (int o = 0; o < k.weights.n; ++o)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          float acc = k.bias.empty() ? 0.0f : k.bias[o];
          for (int ci = 0; ci < icg; ++ci) {
            const int ic = (o / ocg) * icg + ci;
            for (int ky = 0; ky < ekh; ++ky)
              for (int kx = 0; kx < ekw; ++kx)
                acc += padded.at(b, ic, oy * k.stride + ky, ox * k.stride + kx) *
                       ew.at(o, ci, ky, kx);
          }
          out.at(b, o, oy, ox) = acc;
        }
  return out;
}

void check_close(const Tensor& a, const Tensor& b, float tol = 1e-4f) {
  REQUIRE(a.same_shape(b));
  for (std::size_t i = 0; i < a.data.size(); ++i)
    CHECK(a.data[i] == doctest::Approx(b.data[i]).epsilon(tol).scale(1.0));
}

}  // namespace

TEST_CASE("conv2d matches zero-insertion oracle across strides/rates/groups") {
  std::mt19937 rng(7);
  struct Cfg {
    int ic, oc, k, stride, rate, groups;
  };
  for (const Cfg cfg : {Cfg{3, 4, 3, 1, 1, 1}, Cfg{3, 4, 3, 2, 1, 1},
                        Cfg{2, 6, 3, 1, 2, 1}, Cfg{4, 4, 3, 1, 3, 4},
                        Cfg{4, 8, 1, 1, 1, 2}, Cfg{3, 5, 5, 2, 2, 1}}) {
    ConvKernel k;
    k.weights = rand_tensor(cfg.oc, cfg.ic / cfg.groups, cfg.k, cfg.k, rng);
    k.stride = cfg.stride;
    k.rate = cfg.rate;
    k.groups = cfg.groups;
    k.pad_h = k.pad_w = same_padding(cfg.k, cfg.rate);
    k.bias.resize(cfg.oc);
    for (auto& b : k.bias) b = std::uniform_real_distribution<float>(-1, 1)(rng);
    const Tensor x = rand_tensor(2, cfg.ic, 9, 8, rng);
    check_close(conv2d(x, k), conv2d_oracle(x, k));
  }
}

TEST_CASE("conv2d same padding preserves extent at stride 1 and halves at 2") {
  std::mt19937 rng(1);
  const Tensor x = rand_tensor(1, 2, 11, 13, rng);
  ConvKernel k;
  k.weights = rand_tensor(3, 2, 3, 3, rng);
  k.pad_h = k.pad_w = same_padding(3, 1);
  Tensor y = conv2d(x, k);
  CHECK(y.h == 11);
  CHECK(y.w == 13);
  k.stride = 2;
  y = conv2d(x, k);
  CHECK(y.h == 6);  // ceil(11/2)
  CHECK(y.w == 7);  // ceil(13/2)
}

TEST_CASE("conv2d rejects bad configurations") {
  std::mt19937 rng(2);
  const Tensor x = rand_tensor(1, 3, 5, 5, rng);
  ConvKernel k;
  k.weights = rand_tensor(4, 2, 3, 3, rng);  // expects 2 input channels
  CHECK_THROWS_AS(conv2d(x, k), std::invalid_argument);
  k.weights = rand_tensor(4, 3, 3, 3, rng);
  k.stride = 0;
  CHECK_THROWS_AS(conv2d(x, k), std::invalid_argument);
  k.stride = 1;
  k.rate = 4;  // effective kernel 9 > padded input 5
  CHECK_THROWS_AS(conv2d(x, k), std::invalid_argument);
}

TEST_CASE("avg_pool2d excludes padding from the divisor") {
  Tensor x(1, 1, 2, 2);
  x.at(0, 0, 0, 0) = 1;
  x.at(0, 0, 0, 1) = 2;
  x.at(0, 0, 1, 0) = 3;
  x.at(0, 0, 1, 1) = 4;
  // 3x3 window at stride 2 with pad 1: each output sees a 2x2 corner
  const Tensor y = avg_pool2d(x, 3, 2, 1);
  REQUIRE(y.h == 1);
  REQUIRE(y.w == 1);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(2.5));
}

TEST_CASE("avg_pool2d matches a sliding-window oracle") {
  std::mt19937 rng(3);
  const Tensor x = rand_tensor(2, 3, 7, 6, rng);
  const Tensor y = avg_pool2d(x, 5, 1, 2);
  REQUIRE(y.same_shape(x));
  for (int b = 0; b < x.n; ++b)
    for (int c = 0; c < x.c; ++c)
      for (int oy = 0; oy < x.h; ++oy)
        for (int ox = 0; ox < x.w; ++ox) {
          double acc = 0;
          int count = 0;
          for (int dy = -2; dy <= 2; ++dy)
            for (int dx = -2; dx <= 2; ++dx) {
              const int iy = oy + dy, ix = ox + dx;
              if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
              acc += x.at(b, c, iy, ix);
              ++count;
            }
          CHECK(y.at(b, c, oy, ox) ==
                doctest::Approx(acc / count).epsilon(1e-5));
        }
}

TEST_CASE("global_avg_pool equals the arithmetic mean") {
  std::mt19937 rng(4);
  const Tensor x = rand_tensor(2, 3, 4, 5, rng);
  const Tensor y = global_avg_pool(x);
  REQUIRE(y.n == 2);
  REQUIRE(y.c == 3);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int yy = 0; yy < 4; ++yy)
        for (int xx = 0; xx < 5; ++xx) acc += x.at(b, c, yy, xx);
      CHECK(y.at(b, c, 0, 0) == doctest::Approx(acc / 20).epsilon(1e-5));
    }
}

TEST_CASE("fully_connected equals a naive matmul and validates shapes") {
  std::mt19937 rng(5);
  const Tensor z = rand_tensor(2, 4, 1, 1, rng);
  const Tensor W = rand_tensor(3, 4, 1, 1, rng);
  const std::vector<float> bias{0.5f, -1.0f, 2.0f};
  const Tensor y = fully_connected(z, W, bias);
  for (int b = 0; b < 2; ++b)
    for (int o = 0; o < 3; ++o) {
      double acc = bias[o];
      for (int i = 0; i < 4; ++i) acc += W.at(o, i, 0, 0) * z.at(b, i, 0, 0);
      CHECK(y.at(b, o, 0, 0) == doctest::Approx(acc).epsilon(1e-5));
    }
  CHECK_THROWS_AS(fully_connected(rand_tensor(1, 4, 2, 2, rng), W),
                  std::invalid_argument);
  CHECK_THROWS_AS(fully_connected(z, rand_tensor(3, 5, 1, 1, rng)),
                  std::invalid_argument);
  CHECK_THROWS_AS(fully_connected(z, W, {1.0f}), std::invalid_argument);
}

TEST_CASE("activation values at reference points") {
  CHECK(apply_activation(Activation::relu, -2.0) == 0.0);
  CHECK(apply_activation(Activation::relu, 3.0) == 3.0);
  CHECK(apply_activation(Activation::relu6, 7.5) == 6.0);
  CHECK(apply_activation(Activation::sigmoid, 0.0) == doctest::Approx(0.5));
  // hard_sigmoid(x) = relu6(x + 3) / 6
  CHECK(apply_activation(Activation::hard_sigmoid, 0.0) == doctest::Approx(0.5));
  CHECK(apply_activation(Activation::hard_sigmoid, -3.0) == 0.0);
  CHECK(apply_activation(Activation::hard_sigmoid, 3.0) == 1.0);
  CHECK(apply_activation(Activation::hard_sigmoid, 1.5) == doctest::Approx(0.75));
}

TEST_CASE("batch_norm_inference normalizes per channel") {
  Tensor x(1, 2, 1, 2);
  x.at(0, 0, 0, 0) = 1;
  x.at(0, 0, 0, 1) = 3;
  x.at(0, 1, 0, 0) = -2;
  x.at(0, 1, 0, 1) = 2;
  const std::vector<float> mean{2, 0}, var{4, 1}, gamma{1, 2}, beta{0, 1};
  const Tensor y = batch_norm_inference(x, mean, var, gamma, beta, 0.0f);
  CHECK(y.at(0, 0, 0, 0) == doctest::Approx(-0.5));
  CHECK(y.at(0, 0, 0, 1) == doctest::Approx(0.5));
  CHECK(y.at(0, 1, 0, 0) == doctest::Approx(-3.0));
  CHECK(y.at(0, 1, 0, 1) == doctest::Approx(5.0));
  CHECK_THROWS_AS(batch_norm_inference(x, mean, {4.0f, -1.0f}, gamma, beta, 0.0f),
                  std::invalid_argument);
  CHECK_THROWS_AS(batch_norm_inference(x, {1.0f}, var, gamma, beta, 0.0f),
                  std::invalid_argument);
}

TEST_CASE("bilinear_resize: identity, constants, and 2x upsample midpoints") {
  std::mt19937 rng(6);
  const Tensor x = rand_tensor(1, 2, 5, 7, rng);
  const Tensor same = bilinear_resize(x, 5, 7);
  CHECK(same.data == x.data);  // exact identity, not merely close

  Tensor c(1, 1, 3, 3, 2.5f);
  const Tensor up = bilinear_resize(c, 7, 7);
  for (float v : up.data) CHECK(v == doctest::Approx(2.5));

  // 1D ramp doubled: interior samples interpolate at quarter offsets
  Tensor ramp(1, 1, 1, 2);
  ramp.at(0, 0, 0, 0) = 0;
  ramp.at(0, 0, 0, 1) = 1;
  const Tensor r = bilinear_resize(ramp, 1, 4);
  CHECK(r.at(0, 0, 0, 0) == doctest::Approx(0.0));
  CHECK(r.at(0, 0, 0, 1) == doctest::Approx(0.25));
  CHECK(r.at(0, 0, 0, 2) == doctest::Approx(0.75));
  CHECK(r.at(0, 0, 0, 3) == doctest::Approx(1.0));
}

TEST_CASE("elementwise and broadcast helpers") {
  std::mt19937 rng(8);
  const Tensor x = rand_tensor(2, 3, 2, 2, rng);
  const Tensor s = rand_tensor(2, 3, 1, 1, rng);

  const Tensor scaled = scale_channels(x, s);
  const Tensor added = add_channels(x, s);
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 2; ++y)
        for (int xx = 0; xx < 2; ++xx) {
          CHECK(scaled.at(b, c, y, xx) ==
                doctest::Approx(x.at(b, c, y, xx) * s.at(b, c, 0, 0)));
          CHECK(added.at(b, c, y, xx) ==
                doctest::Approx(x.at(b, c, y, xx) + s.at(b, c, 0, 0)));
        }
  CHECK_THROWS_AS(scale_channels(x, rand_tensor(2, 2, 1, 1, rng)),
                  std::invalid_argument);
  CHECK_THROWS_AS(add(x, rand_tensor(2, 3, 2, 3, rng)), std::invalid_argument);

  const Tensor cat = concat_channels(std::vector<Tensor>{x, x});
  CHECK(cat.c == 6);
  CHECK(cat.at(1, 4, 1, 0) == x.at(1, 1, 1, 0));
}

TEST_CASE("all_finite flags NaN and infinity") {
  Tensor x(1, 1, 2, 2, 1.0f);
  CHECK(all_finite(x));
  x.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_FALSE(all_finite(x));
  x.data[3] = std::numeric_limits<float>::infinity();
  CHECK_FALSE(all_finite(x));
}
