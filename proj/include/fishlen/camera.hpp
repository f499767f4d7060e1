#pragma once

#include <cmath>
#include <fstream>
#include <string>

#include "json.hpp"

#include "fishlen/error.hpp"
#include "fishlen/homography.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Brown-Conrady coefficients in normalized image coordinates.
struct Distortion {
  double k1 = 0.0;
  double k2 = 0.0;
  double k3 = 0.0;
  double p1 = 0.0;
  double p2 = 0.0;

  bool is_zero() const {
    return k1 == 0.0 && k2 == 0.0 && k3 == 0.0 && p1 == 0.0 && p2 == 0.0;
  }

  Vec2 apply(const Vec2& xy) const {
    const double x = xy.x(), y = xy.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const double dx = 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
    const double dy = p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
    return {x * radial + dx, y * radial + dy};
  }

  /// 2x2 Jacobian of apply() at xy.
  Eigen::Matrix2d jacobian(const Vec2& xy) const {
    const double x = xy.x(), y = xy.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (k1 + r2 * (k2 + r2 * k3));
    const double dradial = k1 + r2 * (2.0 * k2 + 3.0 * k3 * r2);
    Eigen::Matrix2d j;
    j(0, 0) = radial + 2.0 * x * x * dradial + 2.0 * p1 * y + 6.0 * p2 * x;
    j(0, 1) = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
    j(1, 0) = 2.0 * x * y * dradial + 2.0 * p1 * x + 2.0 * p2 * y;
    j(1, 1) = radial + 2.0 * y * y * dradial + 6.0 * p1 * y + 2.0 * p2 * x;
    return j;
  }
};

/// Intrinsics, distortion, and the homography that carries undistorted pixel
/// coordinates onto the conveyor-belt plane in millimeters.
struct CameraModel {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  double skew = 0.0;
  Distortion distortion;
  Homography belt_from_pixel;  // undistorted px -> belt mm

  Vec2 normalized_from_pixel(const Vec2& px) const {
    const double y = (px.y() - cy) / fy;
    const double x = (px.x() - cx - skew * y) / fx;
    return {x, y};
  }

  Vec2 pixel_from_normalized(const Vec2& xy) const {
    return {fx * xy.x() + skew * xy.y() + cx, fy * xy.y() + cy};
  }

  /// Applies the forward distortion model to an undistorted pixel position.
  Vec2 distort_pixel(const Vec2& undist_px) const {
    if (distortion.is_zero()) return undist_px;
    return pixel_from_normalized(distortion.apply(normalized_from_pixel(undist_px)));
  }

  /// Inverts the distortion model: fixed-point iteration with a Newton
  /// fallback, tolerance 1e-8 px, 50 iterations total.
  Vec2 undistort_pixel(const Vec2& dist_px) const {
    if (distortion.is_zero()) return dist_px;
    const Vec2 target = normalized_from_pixel(dist_px);
    const double tol = 1e-8 / std::max(fx, fy);  // 1e-8 px in normalized units

    Vec2 xy = target;
    constexpr int kFixedPointIters = 25;
    constexpr int kNewtonIters = 25;
    for (int i = 0; i < kFixedPointIters; ++i) {
      const Vec2 err = distortion.apply(xy) - target;
      if (err.norm() < tol) return pixel_from_normalized(xy);
      // x * radial(x) + tangential(x) = target  =>  x = (target - tang) / radial
      const double r2 = xy.squaredNorm();
      const double radial =
          1.0 + r2 * (distortion.k1 + r2 * (distortion.k2 + r2 * distortion.k3));
      const double x = xy.x(), y = xy.y();
      const Vec2 tang(2.0 * distortion.p1 * x * y +
                          distortion.p2 * (r2 + 2.0 * x * x),
                      distortion.p1 * (r2 + 2.0 * y * y) +
                          2.0 * distortion.p2 * x * y);
      if (std::abs(radial) < 1e-12) break;
      xy = (target - tang) / radial;
    }
    for (int i = 0; i < kNewtonIters; ++i) {
      const Vec2 err = distortion.apply(xy) - target;
      if (err.norm() < tol) return pixel_from_normalized(xy);
      xy -= distortion.jacobian(xy).inverse() * err;
    }
    if ((distortion.apply(xy) - target).norm() < tol)
      return pixel_from_normalized(xy);
    throw NumericError("undistort_pixel: iteration did not converge");
  }

  /// Undistorts a raw pixel position, then maps it to the belt plane (mm).
  Vec2 pixel_to_belt(const Vec2& px) const {
    return belt_from_pixel.apply(undistort_pixel(px));
  }
};

inline Vec2 pixel_to_belt(const CameraModel& model, const Vec2& px) {
  return model.pixel_to_belt(px);
}

// ---------------------------------------------------------------------------
// Serialization (format 1)
// ---------------------------------------------------------------------------

inline nlohmann::json camera_to_json(const CameraModel& m) {
  nlohmann::json j;
  j["format"] = 1;
  j["fx"] = m.fx;
  j["fy"] = m.fy;
  j["cx"] = m.cx;
  j["cy"] = m.cy;
  j["skew"] = m.skew;
  j["k1"] = m.distortion.k1;
  j["k2"] = m.distortion.k2;
  j["k3"] = m.distortion.k3;
  j["p1"] = m.distortion.p1;
  j["p2"] = m.distortion.p2;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < 3; ++c) row.push_back(m.belt_from_pixel.matrix(r, c));
    rows.push_back(row);
  }
  j["belt_homography"] = rows;
  return j;
}

inline CameraModel camera_from_json(const nlohmann::json& j) {
  try {
    if (!j.contains("format") || j.at("format").get<int>() != 1)
      throw ParseError("camera file: unsupported or missing format version");
    CameraModel m;
    m.fx = j.at("fx").get<double>();
    m.fy = j.at("fy").get<double>();
    m.cx = j.at("cx").get<double>();
    m.cy = j.at("cy").get<double>();
    m.skew = j.value("skew", 0.0);
    m.distortion.k1 = j.value("k1", 0.0);
    m.distortion.k2 = j.value("k2", 0.0);
    m.distortion.k3 = j.value("k3", 0.0);
    m.distortion.p1 = j.value("p1", 0.0);
    m.distortion.p2 = j.value("p2", 0.0);
    const auto& rows = j.at("belt_homography");
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        m.belt_from_pixel.matrix(r, c) = rows.at(r).at(c).get<double>();
    if (m.fx <= 0.0 || m.fy <= 0.0)
      throw ParseError("camera file: focal lengths must be positive");
    Homography::normalize(m.belt_from_pixel.matrix);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("camera file: ") + e.what());
  }
}

inline CameraModel load_camera(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open camera file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return camera_from_json(j);
}

inline void save_camera(const CameraModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write camera file: " + path);
  out << camera_to_json(m).dump(2) << '\n';
}

}  // namespace fishlen
