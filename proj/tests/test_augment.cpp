#include <catch2/catch_amalgamated.hpp>

#include "objnav/augment.hpp"

using namespace objnav;

namespace {

Tensor blob_state(int k, int m, Rng& rng, int blobs = 6) {
  Tensor s({k, m, m});
  for (int b = 0; b < blobs; ++b) {
    const int ch = rng.uniform_int(0, k - 1);
    const int r0 = rng.uniform_int(2, m - 6), c0 = rng.uniform_int(2, m - 6);
    for (int r = r0; r < r0 + 3; ++r)
      for (int c = c0; c < c0 + 3; ++c) s.at(ch, r, c) = 1.0;
  }
  return s;
}

}  // namespace

TEST_CASE("zero-offset shift is the identity", "[augment]") {
  Rng rng(1);
  Tensor s = blob_state(3, 16, rng);
  Tensor out = apply_shift(s, 0, 0);
  REQUIRE(max_abs_diff(out, s) == 0.0);
}

TEST_CASE("shift moves content by the stated offset", "[augment]") {
  Tensor s({2, 16, 16});
  s.at(0, 7, 5) = 1.0;
  Tensor out = apply_shift(s, 4, 0);
  REQUIRE(out.at(0, 7, 9) == 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) total += out[i];
  REQUIRE(total == 1.0);  // content preserved, nothing smeared

  // Manual translation oracle over the overlap region.
  Rng rng(5);
  Tensor q = blob_state(2, 16, rng);
  Tensor shifted = apply_shift(q, 3, -2);
  for (int ch = 0; ch < 2; ++ch)
    for (int r = 2; r < 16; ++r)
      for (int c = 3; c < 16; ++c)
        REQUIRE(shifted.at(ch, r - 2, c) == q.at(ch, r, c - 3));
}

TEST_CASE("shift offsets are uniform over the 9x9 window", "[augment]") {
  Rng rng(2024);
  Tensor s({1, 16, 16});
  std::map<std::pair<int, int>, int> counts;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto [out, p] = random_shift(s, rng);
    REQUIRE(p.dx >= -4);
    REQUIRE(p.dx <= 4);
    REQUIRE(p.dy >= -4);
    REQUIRE(p.dy <= 4);
    counts[{p.dx, p.dy}]++;
  }
  // Chi-square against uniform over 81 bins; critical value for p=0.01.
  const double expected = double(n) / 81.0;
  double chi2 = 0.0;
  for (int dx = -4; dx <= 4; ++dx)
    for (int dy = -4; dy <= 4; ++dy) {
      const double diff = counts[{dx, dy}] - expected;
      chi2 += diff * diff / expected;
    }
  REQUIRE(chi2 < 112.33);  // chi2_{80, 0.99}
}

TEST_CASE("double flip restores the input", "[augment]") {
  Rng rng(3);
  Tensor s = blob_state(4, 12, rng);
  REQUIRE(max_abs_diff(apply_flip(apply_flip(s, 0), 0), s) == 0.0);
  REQUIRE(max_abs_diff(apply_flip(apply_flip(s, 1), 1), s) == 0.0);
}

TEST_CASE("flip probability zero is always the identity", "[augment]") {
  Rng rng(4);
  Tensor s = blob_state(2, 12, rng);
  for (int i = 0; i < 50; ++i) {
    auto [out, p] = random_flip(s, rng, 0.0);
    REQUIRE(p.flip_axis == -1);
    REQUIRE(max_abs_diff(out, s) == 0.0);
  }
}

TEST_CASE("flip rate matches the configured probability", "[augment]") {
  Rng rng(77);
  Tensor s({1, 12, 12});
  int flips = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    auto [out, p] = random_flip(s, rng, 0.1);
    flips += p.flip_axis >= 0 ? 1 : 0;
  }
  REQUIRE(std::abs(double(flips) / n - 0.1) <= 0.01);
}

TEST_CASE("grayscale coefficients", "[augment]") {
  Tensor rgb({3, 4, 4});
  // white pixel at (0,0), red at (1,1), black elsewhere
  rgb.at(0, 0, 0) = 1.0;
  rgb.at(1, 0, 0) = 1.0;
  rgb.at(2, 0, 0) = 1.0;
  rgb.at(0, 1, 1) = 1.0;
  Tensor g = grayscale(rgb);
  REQUIRE(g.at(0, 0, 0) == Catch::Approx(1.0).margin(1e-12));
  REQUIRE(g.at(1, 0, 0) == g.at(0, 0, 0));
  REQUIRE(g.at(0, 2, 2) == 0.0);
  REQUIRE(g.at(0, 1, 1) == Catch::Approx(0.299).margin(1e-12));
}

TEST_CASE("grayscale rejects raw K-channel states", "[augment]") {
  Tensor s({10, 16, 16});
  REQUIRE_THROWS_AS(grayscale(s), std::invalid_argument);
  // The rendered form is accepted.
  REQUIRE_NOTHROW(grayscale(render_rgb(s)));
}

TEST_CASE("rotation by zero degrees is the identity", "[augment]") {
  Rng rng(6);
  Tensor s = blob_state(3, 20, rng);
  REQUIRE(max_abs_diff(apply_rotate(s, 0.0), s) == 0.0);
}

TEST_CASE("rotate round trip is mostly exact under nearest neighbour", "[augment]") {
  Rng rng(8);
  Tensor s = blob_state(4, 32, rng, 10);
  Tensor round = apply_rotate(apply_rotate(s, 5.0), -5.0);
  std::size_t equal = 0;
  for (std::size_t i = 0; i < s.size(); ++i) equal += round[i] == s[i] ? 1 : 0;
  REQUIRE(double(equal) / double(s.size()) >= 0.95);
}

TEST_CASE("cells near the pivot are invariant under small rotations", "[augment]") {
  Tensor s({1, 17, 17});
  s.at(0, 8, 8) = 1.0;  // odd extent: exact center cell
  for (double deg : {-5.0, -2.5, 1.0, 3.3, 5.0}) {
    Tensor out = apply_rotate(s, deg);
    REQUIRE(out.at(0, 8, 8) == 1.0);
  }
}

TEST_CASE("augmentations preserve shape and value range", "[augment]") {
  Rng rng(12);
  Tensor s = blob_state(6, 24, rng, 12);
  AugmentConfig cfg;
  for (AugmentKind kind : {AugmentKind::Shift, AugmentKind::Flip, AugmentKind::Rotate,
                           AugmentKind::Identity}) {
    cfg.kind = kind;
    for (int i = 0; i < 25; ++i) {
      const TransformParam p = draw_transform(cfg, rng);
      Tensor out = apply_transform(s, p);
      REQUIRE(out.shape() == s.shape());
      for (std::size_t j = 0; j < out.size(); ++j) {
        REQUIRE(out[j] >= 0.0);
        REQUIRE(out[j] <= 1.0);
      }
    }
  }
}

TEST_CASE("identity parameters reproduce the input bit-exactly", "[augment]") {
  Rng rng(13);
  Tensor s = blob_state(5, 20, rng);
  TransformParam p;
  p.kind = AugmentKind::Shift;
  REQUIRE(max_abs_diff(apply_transform(s, p), s) == 0.0);
  p.kind = AugmentKind::Flip;
  REQUIRE(max_abs_diff(apply_transform(s, p), s) == 0.0);
  p.kind = AugmentKind::Rotate;
  REQUIRE(max_abs_diff(apply_transform(s, p), s) == 0.0);
  REQUIRE(p.is_identity());
}

TEST_CASE("transform draws are deterministic under a seeded stream", "[augment]") {
  AugmentConfig cfg;
  cfg.kind = AugmentKind::Rotate;
  Rng a(99), b(99);
  for (int i = 0; i < 20; ++i) {
    const TransformParam pa = draw_transform(cfg, a);
    const TransformParam pb = draw_transform(cfg, b);
    REQUIRE(pa.angle_deg == pb.angle_deg);
  }
}
