#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <cstdint>

namespace fishlen {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Integer pixel coordinate. Pixel centers sit at integer positions.
struct Point2i {
  int x = 0;
  int y = 0;

  friend bool operator==(const Point2i&, const Point2i&) = default;
  friend auto operator<=>(const Point2i&, const Point2i&) = default;
};

}  // namespace fishlen
