#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Convex polygon over pixel centers, vertices counter-clockwise
/// (positive signed area in x-right / y-up orientation).
struct ConvexHull {
  std::vector<Point2i> vertices;

  double area() const {
    double a = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = vertices[i];
      const auto& q = vertices[(i + 1) % n];
      a += static_cast<double>(p.x) * q.y - static_cast<double>(q.x) * p.y;
    }
    return 0.5 * a;
  }

  /// True when the point lies inside or on the boundary (within eps).
  bool contains(const Vec2& p, double eps = 1e-9) const {
    const std::size_t n = vertices.size();
    if (n == 1)
      return std::abs(p.x() - vertices[0].x) <= eps &&
             std::abs(p.y() - vertices[0].y) <= eps;
    if (n == 2) {
      const Vec2 a(vertices[0].x, vertices[0].y);
      const Vec2 b(vertices[1].x, vertices[1].y);
      const Vec2 d = b - a;
      const double len2 = d.squaredNorm();
      const double t = std::clamp(len2 > 0 ? (p - a).dot(d) / len2 : 0.0, 0.0, 1.0);
      return (a + t * d - p).norm() <= eps;
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto& a = vertices[i];
      const auto& b = vertices[(i + 1) % n];
      const double cross = (b.x - a.x) * (p.y() - a.y) -
                           (b.y - a.y) * (p.x() - a.x);
      if (cross < -eps) return false;
    }
    return true;
  }
};

namespace detail {

inline std::int64_t cross_z(const Point2i& o, const Point2i& a, const Point2i& b) {
  return static_cast<std::int64_t>(a.x - o.x) * (b.y - o.y) -
         static_cast<std::int64_t>(a.y - o.y) * (b.x - o.x);
}

}  // namespace detail

/// Monotone-chain hull of a point set. Collinear boundary points are dropped,
/// so no three consecutive vertices are collinear.
inline ConvexHull convex_hull_of_points(std::vector<Point2i> pts) {
  if (pts.empty()) throw ContractError("convex_hull: no points");
  std::sort(pts.begin(), pts.end(),
            [](const Point2i& a, const Point2i& b) {
              return a.x != b.x ? a.x < b.x : a.y < b.y;
            });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());

  const std::size_t n = pts.size();
  if (n <= 2) return ConvexHull{std::move(pts)};

  std::vector<Point2i> hull(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {  // lower chain
    while (k >= 2 && detail::cross_z(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {  // upper chain
    while (k >= lower && detail::cross_z(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);

  // Degenerate (all collinear): monotone chain leaves the two extremes.
  if (hull.size() < 3) {
    std::vector<Point2i> seg{pts.front(), pts.back()};
    if (seg[0] == seg[1]) seg.pop_back();
    return ConvexHull{std::move(seg)};
  }
  return ConvexHull{std::move(hull)};
}

inline ConvexHull convex_hull(const BinaryMask& mask) {
  auto pts = mask.foreground_pixels();
  if (pts.empty()) throw ContractError("convex_hull: empty mask");
  return convex_hull_of_points(std::move(pts));
}

/// Foreground centroid in pixel coordinates.
inline Vec2 mask_centroid(const BinaryMask& mask) {
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      sx += x;
      sy += y;
      ++n;
    }
  }
  if (n == 0) throw ContractError("mask_centroid: empty mask");
  return {sx / static_cast<double>(n), sy / static_cast<double>(n)};
}

struct PrincipalAxis {
  double angle = 0.0;      // radians in (-pi/2, pi/2]
  bool isotropic = false;  // eigenvalue ratio below the floor
  double eigen_ratio = 1.0;
};

/// Orientation of the dominant eigenvector of the foreground covariance.
inline PrincipalAxis principal_axis(const BinaryMask& mask,
                                    double isotropy_ratio = 1.05) {
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        sx += x;
        sy += y;
        ++n;
      }
  if (n < 2) throw ContractError("principal_axis: needs at least 2 pixels");
  const double mx = sx / static_cast<double>(n);
  const double my = sy / static_cast<double>(n);

  double cxx = 0.0, cyy = 0.0, cxy = 0.0;
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x)
      if (mask.at(x, y)) {
        const double dx = x - mx;
        const double dy = y - my;
        cxx += dx * dx;
        cyy += dy * dy;
        cxy += dx * dy;
      }
  cxx /= static_cast<double>(n);
  cyy /= static_cast<double>(n);
  cxy /= static_cast<double>(n);

  if (cxx + cyy <= 0.0)
    throw ContractError("principal_axis: zero second moments");

  const double tr = cxx + cyy;
  const double det = cxx * cyy - cxy * cxy;
  const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
  const double l_max = 0.5 * tr + disc;
  const double l_min = 0.5 * tr - disc;

  PrincipalAxis out;
  out.eigen_ratio = l_min > 0.0 ? l_max / l_min
                                : std::numeric_limits<double>::infinity();
  out.isotropic = out.eigen_ratio < isotropy_ratio;

  double angle = 0.5 * std::atan2(2.0 * cxy, cxx - cyy);
  if (angle <= -M_PI / 2) angle += M_PI;
  if (angle > M_PI / 2) angle -= M_PI;
  out.angle = angle;
  return out;
}

}  // namespace fishlen
