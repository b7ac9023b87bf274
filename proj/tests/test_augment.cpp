#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "swidernet/augment.hpp"

using namespace swidernet;

namespace {

Image random_image(int h, int w, std::mt19937_64& rng) {
  Image img(h, w);
  std::uniform_int_distribution<int> dist(0, 255);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(dist(rng));
  return img;
}

}  // namespace

TEST_CASE("the default policy matches the published table") {
  const AugPolicy p = default_policy();
  REQUIRE(p.sub_policies.size() == 5);
  auto op = [&](int sp, int i) { return p.sub_policies[sp].ops[i]; };

  CHECK(op(0, 0).kind == AugOpKind::Sharpness);
  CHECK(op(0, 0).prob == 0.4);
  CHECK(op(0, 0).magnitude == 1.4);
  CHECK(op(0, 1).kind == AugOpKind::Brightness);
  CHECK(op(0, 1).prob == 0.2);
  CHECK(op(0, 1).magnitude == 2.0);

  CHECK(op(1, 0).kind == AugOpKind::Equalize);
  CHECK(op(1, 0).prob == 0.0);
  CHECK(op(1, 1).kind == AugOpKind::Contrast);

  CHECK(op(2, 0).kind == AugOpKind::Sharpness);
  CHECK(op(2, 1).kind == AugOpKind::Color);

  CHECK(op(3, 0).kind == AugOpKind::Solarize);
  CHECK(op(3, 0).magnitude == 1.4);
  CHECK(op(3, 1).kind == AugOpKind::Equalize);
  CHECK(op(3, 1).prob == 0.6);

  CHECK(op(4, 0).kind == AugOpKind::Sharpness);
  CHECK(op(4, 0).magnitude == 0.2);
  CHECK(op(4, 1).kind == AugOpKind::Equalize);

  for (const auto& sp : p.sub_policies)
    for (const auto& o : sp.ops) {
      CHECK(o.prob >= 0.0);
      CHECK(o.prob <= 1.0);
      CHECK(o.magnitude >= 0.0);
    }
}

TEST_CASE("enhance ops at magnitude 1 are exact identities") {
  std::mt19937_64 rng(0);
  const Image img = random_image(9, 7, rng);
  for (const AugOpKind kind : {AugOpKind::Sharpness, AugOpKind::Brightness,
                               AugOpKind::Contrast, AugOpKind::Color}) {
    const Image out = apply_op(img, kind, 1.0);
    CHECK(out.data == img.data);
  }
}

TEST_CASE("Brightness magnitude 0 blacks the image, 2 doubles it") {
  Image img(2, 2);
  for (auto& v : img.data) v = 70;
  const Image dark = apply_op(img, AugOpKind::Brightness, 0.0);
  for (auto v : dark.data) CHECK(v == 0);
  const Image bright = apply_op(img, AugOpKind::Brightness, 2.0);
  for (auto v : bright.data) CHECK(v == 140);
  const Image clamped = apply_op(img, AugOpKind::Brightness, 10.0);
  for (auto v : clamped.data) CHECK(v == 255);
}

TEST_CASE("Color magnitude 0 produces a grayscale image") {
  std::mt19937_64 rng(1);
  const Image img = random_image(4, 4, rng);
  const Image gray = apply_op(img, AugOpKind::Color, 0.0);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(gray.at(y, x, 0) == gray.at(y, x, 1));
      CHECK(gray.at(y, x, 1) == gray.at(y, x, 2));
    }
}

TEST_CASE("Contrast magnitude 0 collapses to the mean gray") {
  std::mt19937_64 rng(2);
  const Image img = random_image(5, 5, rng);
  const Image flat = apply_op(img, AugOpKind::Contrast, 0.0);
  const std::uint8_t v0 = flat.data[0];
  for (auto v : flat.data) CHECK(v == v0);
}

TEST_CASE("Solarize thresholds per the documented mapping") {
  // magnitude 1.4 -> threshold round(256 * (1 - 0.14)) = 220
  Image img(1, 3);
  img.at(0, 0, 0) = 230;  // >= 220: inverted to 25
  img.at(0, 1, 0) = 219;  // < 220: untouched
  img.at(0, 2, 0) = 220;  // boundary: inverted to 35
  const Image out = apply_op(img, AugOpKind::Solarize, 1.4);
  CHECK(out.at(0, 0, 0) == 25);
  CHECK(out.at(0, 1, 0) == 219);
  CHECK(out.at(0, 2, 0) == 35);

  // magnitude 0 -> threshold 256: identity
  std::mt19937_64 rng(3);
  const Image r = random_image(3, 3, rng);
  CHECK(apply_op(r, AugOpKind::Solarize, 0.0).data == r.data);

  // magnitude 10 -> threshold 0: full inversion
  const Image inv = apply_op(r, AugOpKind::Solarize, 10.0);
  for (std::size_t i = 0; i < r.data.size(); ++i)
    CHECK(inv.data[i] == 255 - r.data[i]);
}

TEST_CASE("Equalize ignores the magnitude and flattens a ramp") {
  std::mt19937_64 rng(4);
  const Image img = random_image(8, 8, rng);
  CHECK(apply_op(img, AugOpKind::Equalize, 1.8).data ==
        apply_op(img, AugOpKind::Equalize, 99.0).data);

  // constant image is untouched (degenerate histogram)
  Image flat(4, 4);
  for (auto& v : flat.data) v = 42;
  CHECK(apply_op(flat, AugOpKind::Equalize, 1.0).data == flat.data);

  // equalizing a two-level image spreads the levels apart
  Image two(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      for (int c = 0; c < 3; ++c) two.at(y, x, c) = y < 16 ? 100 : 110;
  const Image eq = apply_op(two, AugOpKind::Equalize, 1.0);
  const int spread = std::abs(static_cast<int>(eq.at(0, 0, 0)) -
                              static_cast<int>(eq.at(31, 31, 0)));
  CHECK(spread > 10);
}

TEST_CASE("all ops keep byte values valid for scaled magnitudes") {
  std::mt19937_64 rng(5);
  const Image img = random_image(6, 6, rng);
  for (double factor : {1.0, 5.0}) {
    const AugPolicy p = scale_magnitudes(default_policy(), factor);
    for (const auto& sp : p.sub_policies)
      for (const auto& o : sp.ops) {
        const Image out = apply_op(img, o.kind, o.magnitude);
        CHECK(out.data.size() == img.data.size());  // values are uint8 by type
      }
  }
}

TEST_CASE("sample_subpolicy is uniform and seed-deterministic") {
  const AugPolicy p = default_policy();
  std::mt19937_64 rng(0);
  int counts[5] = {0};
  for (int i = 0; i < 10000; ++i) counts[sample_subpolicy(p, rng)]++;
  for (int c : counts) {
    CHECK(c >= 1800);
    CHECK(c <= 2200);
  }

  std::mt19937_64 a(42), b(42);
  for (int i = 0; i < 100; ++i)
    CHECK(sample_subpolicy(p, a) == sample_subpolicy(p, b));

  AugPolicy single;
  single.sub_policies.push_back(p.sub_policies[0]);
  for (int i = 0; i < 10; ++i) CHECK(sample_subpolicy(single, a) == 0);

  CHECK_THROWS_AS(sample_subpolicy(AugPolicy{}, a), std::invalid_argument);
}

TEST_CASE("apply_subpolicy honors the probabilities") {
  std::mt19937_64 rng(6);
  const Image img = random_image(5, 5, rng);

  // both probabilities zero: identity regardless of rng
  SubPolicy never{{AugOp{AugOpKind::Brightness, 0.0, 0.0},
                   AugOp{AugOpKind::Solarize, 0.0, 10.0}}};
  CHECK(apply_subpolicy(img, never, rng).data == img.data);

  // both probabilities one: ops compose in order
  SubPolicy always{{AugOp{AugOpKind::Brightness, 1.0, 0.0},
                    AugOp{AugOpKind::Solarize, 1.0, 10.0}}};
  const Image out = apply_subpolicy(img, always, rng);
  for (auto v : out.data) CHECK(v == 255);  // black, then fully inverted

  // fixed seed: bit-identical output
  std::mt19937_64 s1(9), s2(9);
  const SubPolicy sp = default_policy().sub_policies[0];
  CHECK(apply_subpolicy(img, sp, s1).data == apply_subpolicy(img, sp, s2).data);
}

TEST_CASE("scale_magnitudes multiplies and clamps Solarize") {
  const AugPolicy p = default_policy();
  const AugPolicy s5 = scale_magnitudes(p, 5.0);
  CHECK(s5.sub_policies[0].ops[0].magnitude == doctest::Approx(7.0));  // 1.4*5
  CHECK(s5.sub_policies[3].ops[0].kind == AugOpKind::Solarize);
  CHECK(s5.sub_policies[3].ops[0].magnitude == doctest::Approx(7.0));
  const AugPolicy s10 = scale_magnitudes(p, 10.0);
  CHECK(s10.sub_policies[3].ops[0].magnitude == doctest::Approx(10.0));  // clamped
  CHECK(s10.sub_policies[0].ops[0].magnitude == doctest::Approx(14.0));  // not

  for (std::size_t i = 0; i < p.sub_policies.size(); ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(s5.sub_policies[i].ops[j].prob == p.sub_policies[i].ops[j].prob);

  const AugPolicy same = scale_magnitudes(p, 1.0);
  for (std::size_t i = 0; i < p.sub_policies.size(); ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(same.sub_policies[i].ops[j].magnitude ==
            p.sub_policies[i].ops[j].magnitude);

  CHECK_THROWS_AS(scale_magnitudes(p, 0.0), std::invalid_argument);
}

TEST_CASE("policy table lists all five rows") {
  const std::string table = policy_table(default_policy());
  CHECK(table.find("Sharpness") != std::string::npos);
  CHECK(table.find("Solarize") != std::string::npos);
  CHECK(std::count(table.begin(), table.end(), '\n') == 6);  // header + 5 rows
}

TEST_CASE("PPM round trip preserves bytes") {
  std::mt19937_64 rng(7);
  const Image img = random_image(11, 13, rng);
  const std::string path = "test_image.ppm";
  save_ppm(img, path);
  const Image back = load_ppm(path);
  std::remove(path.c_str());
  CHECK(back.height == img.height);
  CHECK(back.width == img.width);
  CHECK(back.data == img.data);

  CHECK_THROWS_AS(load_ppm("missing.ppm"), std::runtime_error);
  std::ofstream(path) << "P3\n1 1\n255\n0 0 0\n";
  CHECK_THROWS_AS(load_ppm(path), std::runtime_error);
  std::remove(path.c_str());
}
