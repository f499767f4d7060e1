#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fishlen/homography.hpp"
#include "fishlen/rng.hpp"

using namespace fishlen;

namespace {

Homography random_homography(Rng& rng) {
  Homography h;
  h.matrix << rng.uniform(0.5, 2.0), rng.uniform(-0.3, 0.3), rng.uniform(-50, 50),
      rng.uniform(-0.3, 0.3), rng.uniform(0.5, 2.0), rng.uniform(-50, 50),
      rng.uniform(-1e-4, 1e-4), rng.uniform(-1e-4, 1e-4), 1.0;
  return h;
}

std::vector<PointPair> sample_pairs(const Homography& h, Rng& rng, int n,
                                    double noise_px = 0.0) {
  std::vector<PointPair> pairs;
  for (int i = 0; i < n; ++i) {
    const Vec2 src(rng.uniform(0.0, 800.0), rng.uniform(0.0, 600.0));
    Vec2 dst = h.apply(src);
    if (noise_px > 0.0)
      dst += Vec2(rng.normal(0.0, noise_px), rng.normal(0.0, noise_px));
    pairs.push_back({src, dst});
  }
  return pairs;
}

double relative_error(const Mat3& a, const Mat3& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace

TEST_CASE("unit square corners onto themselves give the identity") {
  std::vector<PointPair> pairs = {{{0, 0}, {0, 0}},
                                  {{1, 0}, {1, 0}},
                                  {{1, 1}, {1, 1}},
                                  {{0, 1}, {0, 1}}};
  const auto est = estimate_homography(pairs);
  CHECK(relative_error(est.h.matrix, Mat3::Identity()) < 1e-12);
  CHECK(est.rms_transfer_px < 1e-12);
}

TEST_CASE("20 noiseless points recover a random homography to 1e-8") {
  Rng rng(314);
  for (int trial = 0; trial < 100; ++trial) {
    const Homography truth = random_homography(rng);
    const auto pairs = sample_pairs(truth, rng, 20);
    const auto est = estimate_homography(pairs);
    REQUIRE(relative_error(est.h.matrix, truth.matrix) < 1e-8);
  }
}

TEST_CASE("noisy points keep the RMS transfer residual below half a pixel") {
  Rng rng(2718);
  for (int trial = 0; trial < 100; ++trial) {
    const Homography truth = random_homography(rng);
    const auto pairs = sample_pairs(truth, rng, 30, 0.2);
    const auto est = estimate_homography(pairs);
    REQUIRE(est.rms_transfer_px < 0.5);
  }
}

TEST_CASE("fewer than 4 correspondences is a contract error") {
  std::vector<PointPair> pairs = {{{0, 0}, {0, 0}},
                                  {{1, 0}, {1, 0}},
                                  {{1, 1}, {1, 1}}};
  CHECK_THROWS_AS(estimate_homography(pairs), ContractError);
}

TEST_CASE("collinear sources are a degenerate configuration") {
  std::vector<PointPair> pairs;
  for (int i = 0; i < 8; ++i)
    pairs.push_back({{static_cast<double>(i), 2.0 * i},
                     {static_cast<double>(i), 2.0 * i}});
  CHECK_THROWS_AS(estimate_homography(pairs), NumericError);
}

TEST_CASE("estimation is equivariant under similarity transforms") {
  Rng rng(55);
  const Homography truth = random_homography(rng);
  const auto pairs = sample_pairs(truth, rng, 25, 0.3);

  const double phi = 0.7;
  const double scale = 1.8;
  Mat3 sim;
  sim << scale * std::cos(phi), -scale * std::sin(phi), 12.0,
      scale * std::sin(phi), scale * std::cos(phi), -7.0, 0.0, 0.0, 1.0;
  Homography s;
  s.matrix = sim;

  std::vector<PointPair> transformed;
  for (const auto& pp : pairs)
    transformed.push_back({s.apply(pp.source), pp.target});

  const auto est_plain = estimate_homography(pairs);
  const auto est_trans = estimate_homography(transformed);

  // H' must equal H composed with the inverse similarity, exactly.
  Mat3 expected = est_plain.h.matrix * sim.inverse();
  expected /= expected(2, 2);
  CHECK(relative_error(est_trans.h.matrix, expected) < 1e-9);
}

TEST_CASE("LM refinement does not worsen the transfer residual") {
  Rng rng(808);
  for (int trial = 0; trial < 20; ++trial) {
    const Homography truth = random_homography(rng);
    const auto pairs = sample_pairs(truth, rng, 40, 0.5);
    const auto dlt = estimate_homography(pairs);
    const auto refined = refine_homography(dlt.h, pairs);
    REQUIRE(refined.rms_transfer_px <= dlt.rms_transfer_px + 1e-12);
  }
}

TEST_CASE("homography inverse round-trips points") {
  Rng rng(3);
  const Homography h = random_homography(rng);
  const Homography inv = h.inverse();
  for (int i = 0; i < 10; ++i) {
    const Vec2 p(rng.uniform(0, 500), rng.uniform(0, 500));
    CHECK((inv.apply(h.apply(p)) - p).norm() < 1e-9);
  }
}
