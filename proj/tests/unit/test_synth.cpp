#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "fishlen/calibration.hpp"
#include "fishlen/hull.hpp"
#include "fishlen/pipeline.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/synth.hpp"
#include "support/helpers.hpp"

using namespace fishlen;
using fishlen::testing::polyline_arc_length;

namespace {

SynthSceneSpec small_scene(std::uint64_t seed, int n_fish,
                           OcclusionMode mode = OcclusionMode::None) {
  SynthSceneSpec spec;
  spec.belt_w_mm = 980.0;
  spec.belt_h_mm = 800.0;
  spec.image_width = 1232;  // half resolution keeps unit tests quick
  spec.image_height = 1028;
  spec.camera = make_synth_camera(spec.belt_w_mm, spec.belt_h_mm,
                                  spec.image_width, spec.image_height);
  spec.occlusion = mode;
  spec.overlap_target = 0.25;
  spec.seed = seed;
  Rng rng(derive_seed(seed, 0xf15f));
  for (int i = 0; i < n_fish; ++i)
    spec.fish.push_back(make_random_fish(rng, i + 1));
  return spec;
}

}  // namespace

TEST_CASE("quadrature arc length agrees with dense polyline integration") {
  Rng rng(654);
  for (int trial = 0; trial < 10; ++trial) {
    const SynthFishSpec fish = make_random_fish(rng, trial);
    const double quad = fish.true_length_mm;
    const double poly =
        polyline_arc_length(fish.spine, 0.0, fish.extent_mm, 2000000);
    REQUIRE(std::abs(quad - poly) / poly < 1e-4);  // < 0.01%
  }
}

TEST_CASE("random fish hit the configured length range") {
  Rng rng(11);
  FishRandomization ranges;
  ranges.min_length_mm = 150.0;
  ranges.max_length_mm = 600.0;
  for (int i = 0; i < 20; ++i) {
    const SynthFishSpec fish = make_random_fish(rng, i, ranges);
    CHECK(fish.true_length_mm >= 150.0 - 1e-6);
    CHECK(fish.true_length_mm <= 600.0 + 1e-6);
    CHECK(fish.peak_halfwidth_mm > 0.0);
  }
}

TEST_CASE("the width profile tapers and the notch stays inside the fin") {
  Rng rng(12);
  const SynthFishSpec fish = make_random_fish(rng, 1);
  CHECK(fish.half_width(0.0) == 0.0);
  CHECK(fish.half_width(0.5) > 0.0);
  for (const double t : {0.9, 0.95, 1.0}) {
    const double notch = fish.notch_half_width(t);
    if (fish.forked && t > 1.0 - fish.fork_depth_frac)
      CHECK(notch < fish.half_width(t));
  }
}

TEST_CASE("generate_scene is deterministic for a fixed spec") {
  const SynthSceneSpec spec = small_scene(77, 3);
  const SceneResult a = generate_scene(spec);
  const SceneResult b = generate_scene(spec);
  REQUIRE(a.instances.size() == b.instances.size());
  for (std::size_t i = 0; i < a.instances.size(); ++i)
    CHECK(a.instances[i].segmentation.rle.counts ==
          b.instances[i].segmentation.rle.counts);
  for (std::size_t i = 0; i < a.truth.size(); ++i) {
    CHECK(a.truth[i].length_mm_true == b.truth[i].length_mm_true);
    CHECK(a.truth[i].visible_fraction == b.truth[i].visible_fraction);
  }
}

TEST_CASE("separated scenes render every fish fully visible") {
  const SynthSceneSpec spec = small_scene(101, 4);
  const SceneResult result = generate_scene(spec);
  REQUIRE(result.instances.size() == 4);
  REQUIRE(result.truth.size() == 4);
  for (const auto& row : result.truth)
    CHECK(row.visible_fraction == Catch::Approx(1.0));
  for (const auto& inst : result.instances) {
    CHECK(inst.length_mm % 5 == 0);
    CHECK(inst.length_mm > 0);
  }
}

TEST_CASE("hull of each rendered mask contains the projected spine") {
  const SynthSceneSpec spec = small_scene(55, 3);
  const SceneResult result = generate_scene(spec);
  const CameraModel cam = spec.camera.to_camera_model();
  const Homography pixel_from_belt = cam.belt_from_pixel.inverse();

  for (std::size_t i = 0; i < result.placements.size(); ++i) {
    const auto& placed = result.placements[i];
    const BinaryMask mask = rasterize(result.instances[i].segmentation,
                                      spec.image_width, spec.image_height);
    const ConvexHull hull = convex_hull(mask);

    // Interior spine samples, projected to (distorted) pixels.
    for (int k = 1; k < 20; ++k) {
      const double x = placed.spec.extent_mm * k / 20.0;
      const double y = placed.spec.spine[0] +
                       x * (placed.spec.spine[1] +
                            x * (placed.spec.spine[2] +
                                 x * (placed.spec.spine[3] +
                                      x * placed.spec.spine[4])));
      const double c = std::cos(placed.angle), s = std::sin(placed.angle);
      const Vec2 belt(placed.position.x() + c * x - s * y,
                      placed.position.y() + s * x + c * y);
      const Vec2 undist_px = pixel_from_belt.apply(belt);
      const Vec2 px = cam.distort_pixel(undist_px);
      REQUIRE(hull.contains(px, 1.5));
    }
  }
}

TEST_CASE("occlusion mode splits at least one mask and records visibility") {
  const SynthSceneSpec spec = small_scene(2024, 4, OcclusionMode::Overlapping);
  const SceneResult result = generate_scene(spec);

  bool any_split = false;
  for (const auto& inst : result.instances) {
    const BinaryMask mask = rasterize(inst.segmentation, spec.image_width,
                                      spec.image_height);
    if (count_components(mask) >= 2) any_split = true;
  }
  CHECK(any_split);

  bool any_occluded = false;
  for (const auto& row : result.truth)
    if (row.visible_fraction < 0.95) any_occluded = true;
  CHECK(any_occluded);
}

TEST_CASE("a misplaced camera fails the well-posedness precondition") {
  SynthSceneSpec spec = small_scene(3, 1);
  spec.belt_w_mm = 5000.0;  // belt cannot fit the field of view
  CHECK_THROWS_AS(generate_scene(spec), ContractError);
}

TEST_CASE("straight 400 mm fish comes back within 2 mm through the pipeline") {
  SynthSceneSpec spec;
  spec.image_width = 2464;
  spec.image_height = 2056;
  spec.camera = make_synth_camera(spec.belt_w_mm, spec.belt_h_mm,
                                  spec.image_width, spec.image_height);
  spec.seed = 5;
  SynthFishSpec fish;
  fish.fish_id = 1;
  fish.spine = {0.0, 0.0, 0.0, 0.0, 0.0};
  fish.extent_mm = 400.0;
  fish.peak_halfwidth_mm = 28.0;
  finalize_fish(fish);
  REQUIRE(fish.true_length_mm == Catch::Approx(400.0));
  spec.fish.push_back(fish);

  const SceneResult result = generate_scene(spec);
  REQUIRE(result.instances.size() == 1);
  const BinaryMask mask = rasterize(result.instances.front().segmentation,
                                    spec.image_width, spec.image_height);
  const LengthEstimate est =
      estimate_mask_length(mask, spec.camera.to_camera_model());
  CHECK(est.length_mm == Catch::Approx(400.0).margin(2.0));
}

TEST_CASE("pixel_to_belt inverts the analytic plane projection to 1e-6 mm") {
  Distortion dist;
  dist.k1 = -0.07;
  dist.k2 = 0.004;
  dist.p1 = 2e-4;
  const SynthCamera camera =
      make_synth_camera(980.0, 800.0, 2464, 2056, 1500.0, dist, 1.3, -0.8);
  const CameraModel model = camera.to_camera_model();

  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 belt(rng.uniform(50.0, 930.0), rng.uniform(50.0, 750.0));
    const Vec2 px = camera.project(Vec3(belt.x(), belt.y(), 0.0));
    REQUIRE((model.pixel_to_belt(px) - belt).norm() < 1e-6);
  }
}

TEST_CASE("calibration views: exactly one flat view out of twenty") {
  const SynthCamera camera = make_synth_camera(980.0, 800.0);
  const CalibrationSet set = generate_calibration_views(camera, 20, 9);
  REQUIRE(set.views.size() == 20);
  int flat = 0;
  for (const auto& v : set.views) flat += v.flat_on_belt ? 1 : 0;
  CHECK(flat == 1);
  CHECK(set.board.square_size_mm == 20.0);
  for (const auto& v : set.views)
    CHECK(v.points.size() ==
          static_cast<std::size_t>(set.board.rows * set.board.cols));
}

TEST_CASE("corrupting one correspondence blows up the reported residual") {
  Distortion dist;
  dist.k1 = -0.1;
  const SynthCamera camera =
      make_synth_camera(980.0, 800.0, 2464, 2056, 1500.0, dist);
  CalibrationSet set = generate_calibration_views(camera, 20, 13);

  const double clean_rms = calibrate_planar(set).refined_rms_px;
  set.views[5].points[10].image_px += Vec2(50.0, 0.0);
  const double corrupted_rms = calibrate_planar(set).refined_rms_px;
  CHECK(corrupted_rms >= 10.0 * std::max(clean_rms, 1e-6));
}
