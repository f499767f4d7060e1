#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "fishlen/calibration.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/synth.hpp"

using namespace fishlen;

TEST_CASE("planar calibration recovers a known camera from 20 synthetic views") {
  Distortion dist;
  dist.k1 = -0.1;
  const SynthCamera truth = make_synth_camera(980.0, 800.0, 2464, 2056, 1500.0, dist);
  const CalibrationSet set = generate_calibration_views(truth, 20, 7);

  REQUIRE(set.views.size() == 20);
  int flat = 0;
  for (const auto& v : set.views) flat += v.flat_on_belt ? 1 : 0;
  REQUIRE(flat == 1);

  const CalibrationResult result = calibrate_planar(set);
  CHECK(result.refined_rms_px <= result.initial_rms_px);
  CHECK(result.refined_rms_px < 0.01);

  CHECK(result.camera.fx == Catch::Approx(truth.fx).epsilon(0.001));
  CHECK(result.camera.fy == Catch::Approx(truth.fy).epsilon(0.001));
  CHECK(result.camera.distortion.k1 ==
        Catch::Approx(dist.k1).epsilon(0.05));
}

TEST_CASE("a distortion-free camera is recovered to the same tolerances") {
  const SynthCamera truth = make_synth_camera(980.0, 800.0);
  const CalibrationSet set = generate_calibration_views(truth, 20, 41);
  const CalibrationResult result = calibrate_planar(set);
  CHECK(result.camera.fx == Catch::Approx(truth.fx).epsilon(0.001));
  CHECK(result.camera.fy == Catch::Approx(truth.fy).epsilon(0.001));
  CHECK(std::abs(result.camera.distortion.k1) < 1e-4);
  CHECK(result.refined_rms_px <= result.initial_rms_px);
}

TEST_CASE("two views violate the precondition") {
  const SynthCamera truth = make_synth_camera(980.0, 800.0);
  CalibrationSet set = generate_calibration_views(truth, 5, 3);
  set.views.resize(2);
  CHECK_THROWS_AS(calibrate_planar(set), ContractError);
}

TEST_CASE("views sharing one orientation are ill-conditioned") {
  const SynthCamera truth = make_synth_camera(980.0, 800.0);
  // Three copies of flat-on-belt poses: same plane orientation everywhere.
  CalibrationSet set;
  for (const std::uint64_t seed : {11ULL, 12ULL, 13ULL, 14ULL, 15ULL}) {
    CalibrationSet one = generate_calibration_views(truth, 1, seed);
    set.board = one.board;
    set.views.push_back(one.views.front());
  }
  CHECK_THROWS_AS(calibrate_planar(set), NumericError);
}

TEST_CASE("missing flat view leaves the belt plane undefined") {
  const SynthCamera truth = make_synth_camera(980.0, 800.0);
  CalibrationSet set = generate_calibration_views(truth, 10, 21);
  for (auto& v : set.views) v.flat_on_belt = false;
  CHECK_THROWS_AS(calibrate_planar(set), ContractError);
}

TEST_CASE("flat-board distances survive the pixel-to-belt mapping") {
  Distortion dist;
  dist.k1 = -0.1;
  const SynthCamera truth = make_synth_camera(980.0, 800.0, 2464, 2056, 1500.0, dist);
  const CalibrationSet set = generate_calibration_views(truth, 20, 99);
  const CalibrationResult result = calibrate_planar(set);

  for (const auto& view : set.views) {
    if (!view.flat_on_belt) continue;
    const auto& a = view.points.front();
    const auto& b = view.points.back();
    const double board_dist = (a.board_mm - b.board_mm).norm();
    const double mapped_dist = (result.camera.pixel_to_belt(a.image_px) -
                                result.camera.pixel_to_belt(b.image_px))
                                   .norm();
    CHECK(mapped_dist == Catch::Approx(board_dist).margin(0.1));
  }
}

TEST_CASE("calibration files round-trip and reject off-grid points") {
  const SynthCamera truth = make_synth_camera(980.0, 800.0);
  const CalibrationSet set = generate_calibration_views(truth, 5, 31);

  const auto path =
      std::filesystem::temp_directory_path() / "fishlen_calib.json";
  save_calibration(set, path.string());
  const CalibrationSet loaded = load_calibration(path.string());
  std::filesystem::remove(path);

  REQUIRE(loaded.views.size() == set.views.size());
  CHECK(loaded.board.square_size_mm == set.board.square_size_mm);
  CHECK(loaded.views.front().flat_on_belt);
  CHECK(loaded.views.front().points.size() == set.views.front().points.size());

  nlohmann::json j = calibration_to_json(set);
  j["views"][0]["points"][0]["board_xy"][0] = 3.1415;  // off the 20 mm grid
  CHECK_THROWS_AS(calibration_from_json(j), ContractError);
}
