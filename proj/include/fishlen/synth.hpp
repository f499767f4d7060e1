#pragma once

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fishlen/calibration.hpp"
#include "fishlen/camera.hpp"
#include "fishlen/dataset.hpp"
#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

// ---------------------------------------------------------------------------
// Spine arc length (adaptive Simpson quadrature)
// ---------------------------------------------------------------------------

namespace detail {

inline double poly_eval(const std::array<double, 5>& c, double x) {
  return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4])));
}

inline double poly_deriv(const std::array<double, 5>& c, double x) {
  return c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * 4.0 * c[4]));
}

inline double arc_integrand(const std::array<double, 5>& c, double x) {
  const double d = poly_deriv(c, x);
  return std::sqrt(1.0 + d * d);
}

inline double adaptive_simpson(const std::array<double, 5>& c, double a,
                               double b, double fa, double fm, double fb,
                               double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = arc_integrand(c, lm), frm = arc_integrand(c, rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(c, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(c, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Arc length of y = poly(x) over [x0, x1].
inline double spine_arc_length(const std::array<double, 5>& coeffs, double x0,
                               double x1, double tol = 1e-10) {
  if (!(x1 > x0)) throw ContractError("spine_arc_length: empty interval");
  const double fa = detail::arc_integrand(coeffs, x0);
  const double fb = detail::arc_integrand(coeffs, x1);
  const double m = 0.5 * (x0 + x1);
  const double fm = detail::arc_integrand(coeffs, m);
  const double whole = (x1 - x0) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adaptive_simpson(coeffs, x0, x1, fa, fm, fb, whole,
                                  tol * std::max(1.0, whole), 48);
}

// ---------------------------------------------------------------------------
// Fish shape
// ---------------------------------------------------------------------------

/// A fish is a variable-width tube around a polynomial spine in its local
/// millimeter frame (spine runs from x = 0 to x = extent, nose at 0). The
/// half-width follows a smooth taper of normalized arc position. Forked
/// tails put a small width floor under the fin and carve a V-notch from the
/// end, so the lobes stay thin, reach the spine end, and sit only a few
/// millimeters off-axis; wide lobes would let the hull extend past the spine
/// along the principal axis and bias the estimator upward.
struct SynthFishSpec {
  int fish_id = 0;
  int category_id = 1;
  std::array<double, 5> spine{};  // local-frame y(x), mm
  double extent_mm = 0.0;         // spine x extent
  double peak_halfwidth_mm = 0.0;
  double head_exponent = 0.5;  // taper shape at the nose
  double tail_exponent = 0.6;  // taper shape toward the tail
  bool forked = false;
  double fork_depth_frac = 0.12;       // arc fraction occupied by the fin
  double fork_notch_frac = 0.6;        // notch fraction of local width at the tip
  double tail_tip_halfwidth_mm = 4.0;  // fin width floor for forked tails
  double true_length_mm = 0.0;         // spine arc length by quadrature

  /// Half-width at normalized arc position t in [0, 1]. The tail keeps a
  /// small width floor so the tip stays above raster resolution all the way
  /// to the spine end instead of fading out sub-pixel early.
  double half_width(double t) const {
    const double rise = std::pow(std::clamp(t, 0.0, 1.0), head_exponent);
    const double fall = std::pow(std::clamp(1.0 - t, 0.0, 1.0), tail_exponent);
    const double peak_arg = head_exponent / (head_exponent + tail_exponent);
    const double norm = std::pow(peak_arg, head_exponent) *
                        std::pow(1.0 - peak_arg, tail_exponent);
    double w = peak_halfwidth_mm * rise * fall / norm;
    if (t > 0.5) w = std::max(w, tail_tip_halfwidth_mm);
    return w;
  }

  /// Notch half-width at t; points closer to the spine than this inside the
  /// fin are carved out.
  double notch_half_width(double t) const {
    if (!forked) return -1.0;
    const double fin_start = 1.0 - fork_depth_frac;
    if (t <= fin_start) return -1.0;
    const double s = (t - fin_start) / fork_depth_frac;
    return fork_notch_frac * half_width(t) * s;
  }
};

/// Fills in true_length_mm from the spine definition.
inline void finalize_fish(SynthFishSpec& fish) {
  fish.true_length_mm = spine_arc_length(fish.spine, 0.0, fish.extent_mm);
}

struct FishRandomization {
  double min_length_mm = 150.0;
  double max_length_mm = 600.0;
  double fork_probability = 0.5;
};

/// Draws a fish whose spine arc length hits a target sampled from the
/// configured range; the extent is solved by bisection.
inline SynthFishSpec make_random_fish(Rng& rng, int fish_id,
                                      const FishRandomization& opts = {}) {
  SynthFishSpec fish;
  fish.fish_id = fish_id;
  const double target = rng.uniform(opts.min_length_mm, opts.max_length_mm);

  // Dimensionless slope contributions keep the spine gently curved, as fish
  // lie on a belt: the end slope stays below ~0.35 relative to the body axis.
  const double s1 = rng.uniform(-0.06, 0.06);
  const double s2 = rng.uniform(-0.15, 0.15);
  const double s3 = rng.uniform(-0.05, 0.05);
  const double s4 = rng.uniform(-0.02, 0.02);
  fish.spine[0] = 0.0;
  fish.spine[1] = s1;
  fish.spine[2] = s2 / target;
  fish.spine[3] = s3 / (target * target);
  fish.spine[4] = s4 / (target * target * target);

  double lo = 0.5 * target, hi = 1.1 * target;
  while (spine_arc_length(fish.spine, 0.0, hi) < target) hi *= 1.25;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (spine_arc_length(fish.spine, 0.0, mid) < target ? lo : hi) = mid;
  }
  fish.extent_mm = 0.5 * (lo + hi);

  // Pointed nose and narrow peduncle: lateral extremes near the body ends
  // would otherwise out-project the spine endpoints along the principal
  // axis and bias the hull-extended domain long.
  fish.peak_halfwidth_mm = target * rng.uniform(0.055, 0.085);
  fish.head_exponent = rng.uniform(0.8, 1.2);
  fish.tail_exponent = rng.uniform(1.3, 1.8);
  fish.forked = rng.uniform() < opts.fork_probability;
  fish.fork_depth_frac = rng.uniform(0.08, 0.16);
  fish.fork_notch_frac = rng.uniform(0.50, 0.65);
  fish.tail_tip_halfwidth_mm =
      fish.forked ? rng.uniform(3.0, 5.0) : rng.uniform(1.5, 2.5);
  finalize_fish(fish);
  return fish;
}

// ---------------------------------------------------------------------------
// Synthetic camera (full 3D pose over the belt; the belt plane is z = 0)
// ---------------------------------------------------------------------------

struct SynthCamera {
  double fx = 3696.0;
  double fy = 3696.0;
  double cx = 1231.5;
  double cy = 1027.5;
  Distortion distortion;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();

  Vec2 project(const Vec3& world) const {
    const Vec3 cam = rotation * world + translation;
    if (cam.z() <= 1e-9)
      throw NumericError("SynthCamera: point behind the camera");
    const Vec2 distorted =
        distortion.apply(Vec2(cam.x() / cam.z(), cam.y() / cam.z()));
    return {fx * distorted.x() + cx, fy * distorted.y() + cy};
  }

  /// Camera model with the belt homography induced by the z = 0 plane.
  CameraModel to_camera_model() const {
    CameraModel m;
    m.fx = fx;
    m.fy = fy;
    m.cx = cx;
    m.cy = cy;
    m.skew = 0.0;
    m.distortion = distortion;
    Mat3 kmat;
    kmat << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
    Mat3 plane_to_pixel;
    plane_to_pixel.col(0) = rotation.col(0);
    plane_to_pixel.col(1) = rotation.col(1);
    plane_to_pixel.col(2) = translation;
    Mat3 h = (kmat * plane_to_pixel).inverse();
    Homography::normalize(h);
    m.belt_from_pixel.matrix = h;
    return m;
  }
};

/// Nadir camera over the belt center at the rig's working distance, with an
/// optional small tilt. The focal length is chosen so the belt plus a 10 mm
/// margin fills the field of view; at the default geometry this reproduces
/// the rig's ~0.406 mm/px scale.
inline SynthCamera make_synth_camera(double belt_w_mm, double belt_h_mm,
                                     int image_w = 2464, int image_h = 2056,
                                     double height_mm = 1500.0,
                                     const Distortion& dist = {},
                                     double tilt_x_deg = 0.0,
                                     double tilt_y_deg = 0.0) {
  SynthCamera cam;
  cam.distortion = dist;
  cam.fx = cam.fy = height_mm * std::min(image_w / (belt_w_mm + 20.0),
                                         image_h / (belt_h_mm + 20.0));
  cam.cx = 0.5 * (image_w - 1);
  cam.cy = 0.5 * (image_h - 1);
  Mat3 nadir;
  nadir << 1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0;
  const double ax = tilt_x_deg * M_PI / 180.0;
  const double ay = tilt_y_deg * M_PI / 180.0;
  Mat3 rx, ry;
  rx << 1, 0, 0, 0, std::cos(ax), -std::sin(ax), 0, std::sin(ax), std::cos(ax);
  ry << std::cos(ay), 0, std::sin(ay), 0, 1, 0, -std::sin(ay), 0, std::cos(ay);
  cam.rotation = rx * ry * nadir;
  const Vec3 center(0.5 * belt_w_mm, 0.5 * belt_h_mm, height_mm);
  cam.translation = -cam.rotation * center;
  return cam;
}

// ---------------------------------------------------------------------------
// Scene generation
// ---------------------------------------------------------------------------

enum class OcclusionMode { None, Overlapping };

struct SynthSceneSpec {
  double belt_w_mm = 980.0;
  double belt_h_mm = 800.0;
  int image_width = 2464;
  int image_height = 2056;
  SynthCamera camera;
  std::vector<SynthFishSpec> fish;
  OcclusionMode occlusion = OcclusionMode::None;
  double overlap_target = 0.3;  // fraction of the occludee covered
  std::uint64_t seed = 1;
};

struct PlacedFish {
  SynthFishSpec spec;
  Vec2 position = Vec2::Zero();  // belt mm, spine origin
  double angle = 0.0;            // belt-frame rotation
};

struct SceneTruthRow {
  int fish_id = 0;
  double length_mm_true = 0.0;
  double visible_fraction = 1.0;
};

struct SceneResult {
  std::vector<PlacedFish> placements;
  std::vector<GtInstance> instances;  // image_id left at 0 for the caller
  std::vector<SceneTruthRow> truth;
};

namespace detail {

/// Dense spine polyline with cumulative arc length, local frame.
struct SpineTrace {
  std::vector<Vec2> points;
  std::vector<double> arc;  // prefix arc length
  double total = 0.0;
  double max_half_width = 0.0;

  static SpineTrace build(const SynthFishSpec& fish, int samples = 1024) {
    SpineTrace trace;
    trace.points.reserve(static_cast<std::size_t>(samples) + 1);
    trace.arc.reserve(static_cast<std::size_t>(samples) + 1);
    double acc = 0.0;
    for (int i = 0; i <= samples; ++i) {
      const double x = fish.extent_mm * i / samples;
      const Vec2 p(x, poly_eval(fish.spine, x));
      if (i > 0) acc += (p - trace.points.back()).norm();
      trace.points.push_back(p);
      trace.arc.push_back(acc);
    }
    trace.total = acc;
    for (int i = 0; i <= 64; ++i)
      trace.max_half_width =
          std::max(trace.max_half_width, fish.half_width(i / 64.0));
    return trace;
  }

  /// Nearest point on the polyline (clamped per segment). The tube is cut
  /// flat at the spine ends: a query whose nearest point is a global end
  /// vertex and that lies beyond it along the end tangent is outside.
  bool nearest(const Vec2& p, double& dist, double& t) const {
    const double x = p.x();
    // The nearest curve point cannot be further in x than the vertical gap.
    const double gap = std::abs(p.y() - poly_eval_clamped(x)) + 2.0 * step_x();
    const auto lo_it = std::lower_bound(
        points.begin(), points.end(), x - gap,
        [](const Vec2& a, double v) { return a.x() < v; });
    std::size_t lo = lo_it == points.begin()
                         ? 0
                         : static_cast<std::size_t>(lo_it - points.begin()) - 1;
    bool found = false;
    double best = 1e300, best_arc = 0.0;
    for (std::size_t i = lo; i + 1 < points.size(); ++i) {
      if (points[i].x() > x + gap) break;
      const Vec2 a = points[i], b = points[i + 1];
      const Vec2 d = b - a;
      const double len2 = d.squaredNorm();
      if (len2 <= 0.0) continue;
      const double s = std::clamp((p - a).dot(d) / len2, 0.0, 1.0);
      const double dd = (a + s * d - p).squaredNorm();
      if (dd < best) {
        best = dd;
        best_arc = arc[i] + s * std::sqrt(len2);
        found = true;
      }
    }
    if (!found) return false;
    if (best_arc <= 1e-9) {
      const Vec2 tangent = points[1] - points.front();
      if ((p - points.front()).dot(tangent) < 0.0) return false;
    }
    if (best_arc >= total - 1e-9) {
      const Vec2 tangent = points.back() - points[points.size() - 2];
      if ((p - points.back()).dot(tangent) > 0.0) return false;
    }
    dist = std::sqrt(best);
    t = total > 0.0 ? best_arc / total : 0.0;
    return true;
  }

private:
  double step_x() const {
    return points.size() > 1 ? points[1].x() - points[0].x() : 1.0;
  }

  double poly_eval_clamped(double x) const {
    const double xc = std::clamp(x, points.front().x(), points.back().x());
    // Piecewise-linear read of the trace, good enough for the search window.
    const double fidx = (xc - points.front().x()) / std::max(step_x(), 1e-12);
    const std::size_t i =
        std::min(points.size() - 2, static_cast<std::size_t>(std::max(0.0, fidx)));
    const double frac = std::clamp(fidx - static_cast<double>(i), 0.0, 1.0);
    return points[i].y() + frac * (points[i + 1].y() - points[i].y());
  }
};

inline bool fish_contains(const SynthFishSpec& fish, const SpineTrace& trace,
                          const Vec2& local, double* arc_t = nullptr) {
  if (local.x() < -trace.max_half_width ||
      local.x() > fish.extent_mm + trace.max_half_width)
    return false;
  double dist = 0.0, t = 0.0;
  if (!trace.nearest(local, dist, t)) return false;
  if (dist > fish.half_width(t)) return false;
  if (dist < fish.notch_half_width(t)) return false;
  if (arc_t) *arc_t = t;
  return true;
}

inline Vec2 belt_to_local(const Vec2& belt, const PlacedFish& placed) {
  const double c = std::cos(placed.angle), s = std::sin(placed.angle);
  const Vec2 d = belt - placed.position;
  return {c * d.x() + s * d.y(), -s * d.x() + c * d.y()};
}

inline Vec2 local_to_belt(const Vec2& local, const PlacedFish& placed) {
  const double c = std::cos(placed.angle), s = std::sin(placed.angle);
  return {placed.position.x() + c * local.x() - s * local.y(),
          placed.position.y() + s * local.x() + c * local.y()};
}

inline Vec2 belt_to_pixel(const SynthCamera& camera, const Vec2& belt) {
  return camera.project(Vec3(belt.x(), belt.y(), 0.0));
}

/// Coarse spine samples in belt coordinates, for placement separation tests.
inline std::vector<Vec2> coarse_spine(const SynthFishSpec& fish,
                                      const PlacedFish& placed, int samples = 48) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(samples) + 1);
  for (int i = 0; i <= samples; ++i) {
    const double x = fish.extent_mm * i / samples;
    pts.push_back(local_to_belt(Vec2(x, poly_eval(fish.spine, x)), placed));
  }
  return pts;
}

inline double min_point_distance(const std::vector<Vec2>& a,
                                 const std::vector<Vec2>& b) {
  double best = 1e300;
  for (const auto& p : a)
    for (const auto& q : b) best = std::min(best, (p - q).squaredNorm());
  return std::sqrt(best);
}

inline bool fish_on_belt(const std::vector<Vec2>& spine_belt, double margin,
                         double belt_w, double belt_h) {
  for (const auto& p : spine_belt) {
    if (p.x() < margin || p.x() > belt_w - margin) return false;
    if (p.y() < margin || p.y() > belt_h - margin) return false;
  }
  return true;
}

/// Belt-space overlap fraction |A ∩ B| / |A| on a coarse grid.
inline double overlap_fraction(const SynthFishSpec& fa, const PlacedFish& pa,
                               const SpineTrace& ta, const SynthFishSpec& fb,
                               const PlacedFish& pb, const SpineTrace& tb,
                               double grid_mm = 2.0) {
  const auto spine_a = coarse_spine(fa, pa);
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : spine_a) {
    x0 = std::min(x0, p.x());
    y0 = std::min(y0, p.y());
    x1 = std::max(x1, p.x());
    y1 = std::max(y1, p.y());
  }
  x0 -= ta.max_half_width;
  y0 -= ta.max_half_width;
  x1 += ta.max_half_width;
  y1 += ta.max_half_width;

  std::int64_t in_a = 0, in_both = 0;
  for (double y = y0; y <= y1; y += grid_mm) {
    for (double x = x0; x <= x1; x += grid_mm) {
      const Vec2 belt(x, y);
      if (!fish_contains(fa, ta, belt_to_local(belt, pa))) continue;
      ++in_a;
      if (fish_contains(fb, tb, belt_to_local(belt, pb))) ++in_both;
    }
  }
  return in_a > 0 ? static_cast<double>(in_both) / static_cast<double>(in_a) : 0.0;
}

}  // namespace detail

/// Places and renders the scene. Masks are produced by per-pixel
/// point-in-fish tests through the camera (distortion applied); later fish
/// occlude earlier ones. Annotation lengths are rounded to 5 mm; the truth
/// rows keep the unrounded values.
inline SceneResult generate_scene(const SynthSceneSpec& spec) {
  if (spec.fish.empty()) throw ContractError("generate_scene: no fish");
  const double belt_margin = 15.0;

  // Well-posedness: belt corners must project inside the image.
  {
    const double w = spec.belt_w_mm, h = spec.belt_h_mm;
    for (const Vec2 corner :
         {Vec2(0, 0), Vec2(w, 0), Vec2(0, h), Vec2(w, h)}) {
      const Vec2 px = detail::belt_to_pixel(spec.camera, corner);
      if (px.x() < -2.0 || px.y() < -2.0 || px.x() > spec.image_width + 1.0 ||
          px.y() > spec.image_height + 1.0)
        throw ContractError(
            "generate_scene: belt is not fully inside the field of view");
    }
  }

  std::vector<detail::SpineTrace> traces;
  traces.reserve(spec.fish.size());
  for (const auto& fish : spec.fish) {
    if (fish.extent_mm <= 0.0 || fish.peak_halfwidth_mm <= 0.0)
      throw ContractError("generate_scene: fish " + std::to_string(fish.fish_id) +
                          " has non-positive geometry");
    traces.push_back(detail::SpineTrace::build(fish));
  }

  Rng rng(derive_seed(spec.seed, 0x91aceULL));

  // Placement. Separated fish keep a clearance between spines; occlusion
  // mode pairs fish so the later one crosses the earlier one near its middle.
  std::vector<PlacedFish> placed;
  std::vector<std::vector<Vec2>> spines_belt;
  const auto try_random_placement = [&](std::size_t i, bool require_clear) {
    const auto& fish = spec.fish[i];
    for (int attempt = 0; attempt < 400; ++attempt) {
      PlacedFish cand;
      cand.spec = fish;
      cand.angle = rng.uniform(0.0, 2.0 * M_PI);
      cand.position = {rng.uniform(belt_margin, spec.belt_w_mm - belt_margin),
                       rng.uniform(belt_margin, spec.belt_h_mm - belt_margin)};
      const auto spine = detail::coarse_spine(fish, cand);
      const double clearance = traces[i].max_half_width + belt_margin;
      if (!detail::fish_on_belt(spine, clearance, spec.belt_w_mm, spec.belt_h_mm))
        continue;
      if (require_clear) {
        bool clear = true;
        for (std::size_t j = 0; j < placed.size() && clear; ++j) {
          const double need = traces[i].max_half_width +
                              traces[j].max_half_width + 10.0;
          if (detail::min_point_distance(spine, spines_belt[j]) < need)
            clear = false;
        }
        if (!clear) continue;
      }
      placed.push_back(cand);
      spines_belt.push_back(spine);
      return true;
    }
    return false;
  };

  if (spec.occlusion == OcclusionMode::None) {
    for (std::size_t i = 0; i < spec.fish.size(); ++i)
      if (!try_random_placement(i, true))
        throw ContractError("generate_scene: cannot place fish " +
                            std::to_string(spec.fish[i].fish_id) +
                            " without contact; reduce the fish count");
  } else {
    for (std::size_t i = 0; i < spec.fish.size(); ++i) {
      if (i % 2 == 0) {
        if (!try_random_placement(i, true))
          throw ContractError("generate_scene: cannot place fish " +
                              std::to_string(spec.fish[i].fish_id));
        continue;
      }
      // Occluder: cross the previous fish near its midpoint at an angle
      // flat enough to reach the target overlap fraction.
      const auto& under = spec.fish[i - 1];
      const auto& under_placed = placed[i - 1];
      const auto& fish = spec.fish[i];
      bool done = false;
      for (int attempt = 0; attempt < 400 && !done; ++attempt) {
        const double tx = rng.uniform(0.35, 0.65) * under.extent_mm;
        const Vec2 cross_local(tx, detail::poly_eval(under.spine, tx));
        const Vec2 cross_belt = detail::local_to_belt(cross_local, under_placed);
        const double tangent =
            under_placed.angle + std::atan(detail::poly_deriv(under.spine, tx));

        const double mean_width = 1.2 * traces[i].max_half_width;
        double sin_phi = mean_width / (std::max(spec.overlap_target, 0.02) *
                                       under.extent_mm);
        sin_phi = std::clamp(sin_phi * rng.uniform(0.8, 1.6), 0.06, 1.0);
        const double phi = std::asin(sin_phi) *
                           (rng.uniform() < 0.5 ? 1.0 : -1.0);

        PlacedFish cand;
        cand.spec = fish;
        cand.angle = tangent + phi;
        // Put a mid-spine point of the occluder on the crossing point.
        const double sx = rng.uniform(0.4, 0.6) * fish.extent_mm;
        const Vec2 anchor(sx, detail::poly_eval(fish.spine, sx));
        const double c = std::cos(cand.angle), s = std::sin(cand.angle);
        cand.position = cross_belt - Vec2(c * anchor.x() - s * anchor.y(),
                                          s * anchor.x() + c * anchor.y());
        const auto spine = detail::coarse_spine(fish, cand);
        const double clearance = traces[i].max_half_width + belt_margin;
        if (!detail::fish_on_belt(spine, clearance, spec.belt_w_mm,
                                  spec.belt_h_mm))
          continue;
        const double frac =
            detail::overlap_fraction(under, under_placed, traces[i - 1], fish,
                                     cand, traces[i]);
        if (frac < spec.overlap_target) continue;
        placed.push_back(cand);
        spines_belt.push_back(spine);
        done = true;
      }
      if (!done)
        throw ContractError(
            "generate_scene: unsatisfiable overlap target for fish " +
            std::to_string(fish.fish_id));
    }
  }

  // Rendering: ownership raster, later fish on top.
  const int iw = spec.image_width, ih = spec.image_height;
  std::vector<std::int16_t> owner(static_cast<std::size_t>(iw) * ih, -1);
  std::vector<std::int64_t> total_area(placed.size(), 0);
  const CameraModel cam_model = spec.camera.to_camera_model();

  for (std::size_t i = 0; i < placed.size(); ++i) {
    const auto& fish = placed[i].spec;
    const auto& trace = traces[i];

    // Pixel-space bounding rectangle from a grid over the belt bounds.
    double bx0 = 1e300, by0 = 1e300, bx1 = -1e300, by1 = -1e300;
    for (const auto& p : spines_belt[i]) {
      bx0 = std::min(bx0, p.x());
      by0 = std::min(by0, p.y());
      bx1 = std::max(bx1, p.x());
      by1 = std::max(by1, p.y());
    }
    const double pad = trace.max_half_width + 4.0;
    bx0 -= pad;
    by0 -= pad;
    bx1 += pad;
    by1 += pad;
    double px0 = 1e300, py0 = 1e300, px1 = -1e300, py1 = -1e300;
    for (int gy = 0; gy <= 4; ++gy) {
      for (int gx = 0; gx <= 4; ++gx) {
        const Vec2 belt(bx0 + (bx1 - bx0) * gx / 4.0,
                        by0 + (by1 - by0) * gy / 4.0);
        const Vec2 px = detail::belt_to_pixel(spec.camera, belt);
        px0 = std::min(px0, px.x());
        py0 = std::min(py0, px.y());
        px1 = std::max(px1, px.x());
        py1 = std::max(py1, px.y());
      }
    }
    const int x_lo = std::max(0, static_cast<int>(std::floor(px0)) - 3);
    const int y_lo = std::max(0, static_cast<int>(std::floor(py0)) - 3);
    const int x_hi = std::min(iw - 1, static_cast<int>(std::ceil(px1)) + 3);
    const int y_hi = std::min(ih - 1, static_cast<int>(std::ceil(py1)) + 3);

    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        const Vec2 belt = cam_model.pixel_to_belt(Vec2(x, y));
        const Vec2 local = detail::belt_to_local(belt, placed[i]);
        if (!detail::fish_contains(fish, trace, local)) continue;
        ++total_area[i];
        owner[static_cast<std::size_t>(y) * iw + x] = static_cast<std::int16_t>(i);
      }
    }
  }

  std::vector<BinaryMask> visible(placed.size());
  std::vector<std::int64_t> owned(placed.size(), 0);
  for (auto& m : visible) m = BinaryMask(iw, ih);
  for (int y = 0; y < ih; ++y) {
    for (int x = 0; x < iw; ++x) {
      const std::int16_t o = owner[static_cast<std::size_t>(y) * iw + x];
      if (o < 0) continue;
      visible[static_cast<std::size_t>(o)].set(x, y);
      ++owned[static_cast<std::size_t>(o)];
    }
  }

  SceneResult result;
  result.placements = placed;
  for (std::size_t i = 0; i < placed.size(); ++i) {
    const auto& fish = placed[i].spec;
    SceneTruthRow row;
    row.fish_id = fish.fish_id;
    row.length_mm_true = fish.true_length_mm;
    row.visible_fraction =
        total_area[i] > 0
            ? static_cast<double>(owned[i]) / static_cast<double>(total_area[i])
            : 0.0;
    result.truth.push_back(row);
    if (owned[i] == 0) continue;  // fully hidden, no instance

    GtInstance inst;
    inst.image_id = 0;
    inst.category_id = fish.category_id;
    inst.fish_id = fish.fish_id;
    inst.length_mm =
        static_cast<int>(std::lround(fish.true_length_mm / 5.0)) * 5;
    inst.segmentation.rle = encode_rle(visible[i]);
    result.instances.push_back(std::move(inst));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Calibration view synthesis
// ---------------------------------------------------------------------------

struct CalibrationViewOptions {
  BoardSpec board;        // pitch 20 mm by default
  double belt_w_mm = 980.0;
  double belt_h_mm = 800.0;
  int image_width = 2464;
  int image_height = 2056;
};

/// n views of the checkerboard through the given camera: one flat on the
/// belt, the rest in randomized tilted poses, all corners inside the image.
inline CalibrationSet generate_calibration_views(
    const SynthCamera& camera, int n = 20, std::uint64_t seed = 0,
    const CalibrationViewOptions& options = {}) {
  if (n < 1) throw ContractError("generate_calibration_views: n must be >= 1");
  const auto& board = options.board;
  const double bw = (board.cols - 1) * board.square_size_mm;
  const double bh = (board.rows - 1) * board.square_size_mm;

  Rng rng(derive_seed(seed, 0xca11b));
  CalibrationSet set;
  set.board = board;

  const auto corners_local = [&]() {
    std::vector<Vec2> pts;
    for (int r = 0; r < board.rows; ++r)
      for (int c = 0; c < board.cols; ++c)
        pts.emplace_back(c * board.square_size_mm, r * board.square_size_mm);
    return pts;
  }();

  const auto project_view = [&](const Mat3& rot, const Vec3& origin,
                                PlanarView& view) {
    view.points.clear();
    for (const auto& bp : corners_local) {
      const Vec3 world = origin + rot * Vec3(bp.x(), bp.y(), 0.0);
      const Vec2 px = camera.project(world);
      if (px.x() < 4.0 || px.y() < 4.0 || px.x() > options.image_width - 4.0 ||
          px.y() > options.image_height - 4.0)
        return false;
      view.points.push_back({px, bp});
    }
    return true;
  };

  // Flat-on-belt view: board lying on z = 0, randomly shifted and rotated.
  {
    PlanarView view;
    view.flat_on_belt = true;
    bool ok = false;
    for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
      const double yaw = rng.uniform(0.0, 2.0 * M_PI);
      Mat3 rot;
      rot << std::cos(yaw), -std::sin(yaw), 0.0, std::sin(yaw), std::cos(yaw),
          0.0, 0.0, 0.0, 1.0;
      const Vec3 origin(rng.uniform(20.0, options.belt_w_mm - bw - 20.0),
                        rng.uniform(20.0, options.belt_h_mm - bh - 20.0), 0.0);
      ok = project_view(rot, origin, view);
    }
    if (!ok)
      throw NumericError(
          "generate_calibration_views: cannot place the flat board in view");
    set.views.push_back(std::move(view));
  }

  for (int v = 1; v < n; ++v) {
    PlanarView view;
    view.flat_on_belt = false;
    bool ok = false;
    for (int attempt = 0; attempt < 400 && !ok; ++attempt) {
      const double yaw = rng.uniform(0.0, 2.0 * M_PI);
      const double tilt = rng.uniform(0.18, 0.65);  // 10..37 degrees
      const double tilt_dir = rng.uniform(0.0, 2.0 * M_PI);
      const Vec3 axis(std::cos(tilt_dir), std::sin(tilt_dir), 0.0);
      const Mat3 tilt_rot =
          Eigen::AngleAxisd(tilt, axis).toRotationMatrix();
      Mat3 yaw_rot;
      yaw_rot << std::cos(yaw), -std::sin(yaw), 0.0, std::sin(yaw),
          std::cos(yaw), 0.0, 0.0, 0.0, 1.0;
      const Mat3 rot = tilt_rot * yaw_rot;
      const Vec3 origin(
          rng.uniform(40.0, options.belt_w_mm - bw - 40.0),
          rng.uniform(40.0, options.belt_h_mm - bh - 40.0),
          rng.uniform(0.0, 350.0));
      ok = project_view(rot, origin, view);
    }
    if (!ok)
      throw NumericError(
          "generate_calibration_views: cannot place a tilted board in view");
    set.views.push_back(std::move(view));
  }
  return set;
}

}  // namespace fishlen
