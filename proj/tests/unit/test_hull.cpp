#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fishlen/hull.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/skeleton.hpp"
#include "support/helpers.hpp"

using namespace fishlen;
using fishlen::testing::disk_mask;
using fishlen::testing::random_blob;
using fishlen::testing::rotated_bar;

TEST_CASE("hull of three isolated pixels is their triangle") {
  BinaryMask mask(20, 20);
  mask.set(2, 2);
  mask.set(15, 3);
  mask.set(8, 16);
  const ConvexHull hull = convex_hull(mask);
  REQUIRE(hull.vertices.size() == 3);
  for (const auto& p : {Point2i{2, 2}, Point2i{15, 3}, Point2i{8, 16}})
    CHECK(std::count(hull.vertices.begin(), hull.vertices.end(), p) == 1);
  CHECK(hull.area() > 0.0);  // counter-clockwise orientation
}

TEST_CASE("hull of a filled disk has nearly the disk area") {
  const BinaryMask disk = disk_mask(80, 80, 40, 40, 30);
  const ConvexHull hull = convex_hull(disk);
  // Exact area of the hull of lattice points inside radius 30, computed
  // independently (scipy.spatial.ConvexHull). The lattice hull is inscribed,
  // so it sits ~1.3% below pi*r^2; larger radii approach the analytic area.
  CHECK(hull.area() == Catch::Approx(2792.0).epsilon(1e-12));
  CHECK(hull.area() == Catch::Approx(M_PI * 30.0 * 30.0).epsilon(0.013));

  const BinaryMask big = disk_mask(180, 180, 90, 90, 80);
  CHECK(convex_hull(big).area() ==
        Catch::Approx(M_PI * 80.0 * 80.0).epsilon(0.005));
}

TEST_CASE("hull is idempotent and strictly convex on random blobs") {
  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const BinaryMask blob = random_blob(rng);
    if (blob.empty()) continue;
    const ConvexHull hull = convex_hull(blob);

    // Strict convexity: every consecutive triple turns left.
    const auto& v = hull.vertices;
    if (v.size() >= 3) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        const auto& c = v[(i + 2) % v.size()];
        const long long cross =
            static_cast<long long>(b.x - a.x) * (c.y - a.y) -
            static_cast<long long>(b.y - a.y) * (c.x - a.x);
        REQUIRE(cross > 0);
      }
    }

    // Hull of the hull vertices is the hull itself.
    const ConvexHull again = convex_hull_of_points(hull.vertices);
    CHECK(again.vertices == hull.vertices);

    // Contains every foreground pixel, and every skeleton pixel.
    for (const auto& p : blob.foreground_pixels())
      REQUIRE(hull.contains(Vec2(p.x, p.y), 1e-7));
    for (const auto& p : skeletonize(blob).pixels)
      REQUIRE(hull.contains(Vec2(p.x, p.y), 1e-7));
  }
}

TEST_CASE("convex hull of an empty mask throws") {
  CHECK_THROWS_AS(convex_hull(BinaryMask(4, 4)), ContractError);
}

TEST_CASE("principal axis of a horizontal bar is zero") {
  BinaryMask mask(64, 16);
  for (int y = 6; y < 10; ++y)
    for (int x = 4; x < 60; ++x) mask.set(x, y);
  const PrincipalAxis axis = principal_axis(mask);
  CHECK_FALSE(axis.isotropic);
  CHECK(std::abs(axis.angle) < 1e-9);
}

TEST_CASE("principal axis recovers a 30-degree bar within half a degree") {
  const double angle = 30.0 * M_PI / 180.0;
  const BinaryMask bar = rotated_bar(200, 200, 100, 100, 70, 8, angle);
  const PrincipalAxis axis = principal_axis(bar);
  CHECK_FALSE(axis.isotropic);
  CHECK(axis.angle == Catch::Approx(angle).margin(0.5 * M_PI / 180.0));
}

TEST_CASE("principal axis flags a disk as isotropic") {
  const BinaryMask disk = disk_mask(64, 64, 32, 32, 20);
  const PrincipalAxis axis = principal_axis(disk);
  CHECK(axis.isotropic);
}

TEST_CASE("principal axis stays in the half-open interval") {
  for (const double deg : {-89.0, -45.0, -1.0, 1.0, 45.0, 89.0}) {
    const double angle = deg * M_PI / 180.0;
    const BinaryMask bar = rotated_bar(200, 200, 100, 100, 60, 6, angle);
    const PrincipalAxis axis = principal_axis(bar);
    CHECK(axis.angle > -M_PI / 2);
    CHECK(axis.angle <= M_PI / 2);
    CHECK(axis.angle == Catch::Approx(angle).margin(0.02));
  }
}

TEST_CASE("principal axis contract errors") {
  BinaryMask one(8, 8);
  one.set(3, 3);
  CHECK_THROWS_AS(principal_axis(one), ContractError);
}
