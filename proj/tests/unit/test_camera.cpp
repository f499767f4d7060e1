#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>

#include "fishlen/camera.hpp"
#include "fishlen/rng.hpp"

using namespace fishlen;

namespace {

CameraModel rig_camera(const Distortion& dist = {}) {
  CameraModel m;
  m.fx = 3696.0;
  m.fy = 3696.0;
  m.cx = 1231.5;
  m.cy = 1027.5;
  m.distortion = dist;
  return m;
}

}  // namespace

TEST_CASE("zero distortion makes undistort the identity") {
  const CameraModel m = rig_camera();
  const Vec2 p(123.4, 567.8);
  CHECK((m.undistort_pixel(p) - p).norm() == 0.0);
}

TEST_CASE("principal point is a fixed point of pure radial distortion") {
  Distortion dist;
  dist.k1 = -0.1;
  dist.k2 = 0.01;
  const CameraModel m = rig_camera(dist);
  const Vec2 pp(m.cx, m.cy);
  CHECK((m.distort_pixel(pp) - pp).norm() < 1e-12);
  CHECK((m.undistort_pixel(pp) - pp).norm() < 1e-9);
}

TEST_CASE("undistort inverts the forward model to 1e-6 px across the image") {
  Distortion dist;
  dist.k1 = -0.1;
  dist.k2 = 0.01;
  const CameraModel m = rig_camera(dist);

  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec2 undistorted(rng.uniform(0.0, 2464.0), rng.uniform(0.0, 2056.0));
    const Vec2 distorted = m.distort_pixel(undistorted);
    const Vec2 recovered = m.undistort_pixel(distorted);
    REQUIRE((recovered - undistorted).norm() < 1e-6);
  }
}

TEST_CASE("undistort handles tangential terms and k3") {
  Distortion dist;
  dist.k1 = -0.08;
  dist.k2 = 0.012;
  dist.k3 = -0.002;
  dist.p1 = 4e-4;
  dist.p2 = -3e-4;
  const CameraModel m = rig_camera(dist);

  Rng rng(78);
  for (int trial = 0; trial < 200; ++trial) {
    const Vec2 undistorted(rng.uniform(0.0, 2464.0), rng.uniform(0.0, 2056.0));
    const Vec2 distorted = m.distort_pixel(undistorted);
    REQUIRE((m.undistort_pixel(distorted) - undistorted).norm() < 1e-6);
  }
}

TEST_CASE("identity homography with zero distortion reads pixels as millimeters") {
  const CameraModel m = rig_camera();
  const Vec2 p(321.0, 654.0);
  CHECK((m.pixel_to_belt(p) - p).norm() < 1e-12);
}

TEST_CASE("pure scale homography applies the rig's mm-per-px factor") {
  CameraModel m = rig_camera();
  const double scale = 1000.0 / 2464.0;  // belt width over image width
  m.belt_from_pixel.matrix << scale, 0, 0, 0, scale, 0, 0, 0, 1;
  const Vec2 p(1000.0, 500.0);
  const Vec2 belt = m.pixel_to_belt(p);
  CHECK(belt.x() == Catch::Approx(scale * 1000.0).epsilon(1e-12));
  CHECK(belt.y() == Catch::Approx(scale * 500.0).epsilon(1e-12));
}

TEST_CASE("points mapping to the plane at infinity raise a numeric error") {
  CameraModel m = rig_camera();
  m.belt_from_pixel.matrix << 1, 0, 0, 0, 1, 0, -1e-3, 0, 1;
  CHECK_THROWS_AS(m.pixel_to_belt(Vec2(1000.0, 0.0)), NumericError);
}

TEST_CASE("camera serialization round-trips through JSON, format 1") {
  CameraModel m = rig_camera();
  m.distortion.k1 = -0.1;
  m.distortion.p1 = 1e-4;
  m.belt_from_pixel.matrix << 0.41, 0.001, -3.0, -0.002, 0.405, 2.0, 1e-6, -2e-6,
      1.0;

  const auto path = std::filesystem::temp_directory_path() / "fishlen_cam.json";
  save_camera(m, path.string());
  const CameraModel loaded = load_camera(path.string());
  std::filesystem::remove(path);

  CHECK(loaded.fx == m.fx);
  CHECK(loaded.fy == m.fy);
  CHECK(loaded.distortion.k1 == m.distortion.k1);
  CHECK(loaded.distortion.p1 == m.distortion.p1);
  CHECK((loaded.belt_from_pixel.matrix - m.belt_from_pixel.matrix).norm() < 1e-15);
}

TEST_CASE("camera files without the format key are rejected") {
  nlohmann::json j;
  j["fx"] = 1000.0;
  CHECK_THROWS_AS(camera_from_json(j), ParseError);
}
