#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fishlen/mask.hpp"
#include "fishlen/rng.hpp"
#include "fishlen/types.hpp"

namespace fishlen::testing {

/// Mask from ASCII art rows ('#' = foreground). Rows must share one width.
inline BinaryMask mask_from_art(const std::vector<std::string>& rows) {
  BinaryMask mask(static_cast<int>(rows[0].size()),
                  static_cast<int>(rows.size()));
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x)
      if (rows[y][x] == '#')
        mask.set(static_cast<int>(x), static_cast<int>(y));
  return mask;
}

/// Random blob: a union of overlapping disks grown by a short random walk.
inline BinaryMask random_blob(Rng& rng, int width = 96, int height = 96,
                              int disks = 8) {
  BinaryMask mask(width, height);
  double cx = rng.uniform(0.25, 0.75) * width;
  double cy = rng.uniform(0.25, 0.75) * height;
  for (int d = 0; d < disks; ++d) {
    const double r = rng.uniform(3.5, 9.0);
    const int x0 = std::max(0, static_cast<int>(cx - r - 1));
    const int x1 = std::min(width - 1, static_cast<int>(cx + r + 1));
    const int y0 = std::max(0, static_cast<int>(cy - r - 1));
    const int y1 = std::min(height - 1, static_cast<int>(cy + r + 1));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) mask.set(x, y);
    const double step = rng.uniform(2.0, r);
    const double dir = rng.uniform(0.0, 2.0 * M_PI);
    cx = std::clamp(cx + step * std::cos(dir), 8.0, width - 8.0);
    cy = std::clamp(cy + step * std::sin(dir), 8.0, height - 8.0);
  }
  return mask;
}

/// Filled disk mask.
inline BinaryMask disk_mask(int width, int height, double cx, double cy,
                            double radius) {
  BinaryMask mask(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= radius * radius)
        mask.set(x, y);
  return mask;
}

/// Axis-aligned rectangle rotated by `angle` around its center, rendered as a
/// polygon-free direct raster (point-in-rotated-rect test).
inline BinaryMask rotated_bar(int width, int height, double cx, double cy,
                              double half_len, double half_width,
                              double angle) {
  BinaryMask mask(width, height);
  const double c = std::cos(angle), s = std::sin(angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - cx, dy = y - cy;
      const double u = c * dx + s * dy;
      const double v = -s * dx + c * dy;
      if (std::abs(u) <= half_len && std::abs(v) <= half_width) mask.set(x, y);
    }
  }
  return mask;
}

/// Dense polyline integration of the arc length of y = poly(x); the slow
/// independent check for quadrature results.
inline double polyline_arc_length(const std::array<double, 5>& coeffs,
                                  double x0, double x1, int segments = 2000000) {
  const auto eval = [&](double x) {
    return coeffs[0] +
           x * (coeffs[1] + x * (coeffs[2] + x * (coeffs[3] + x * coeffs[4])));
  };
  double total = 0.0;
  double px = x0, py = eval(x0);
  for (int i = 1; i <= segments; ++i) {
    const double x = x0 + (x1 - x0) * i / segments;
    const double y = eval(x);
    total += std::hypot(x - px, y - py);
    px = x;
    py = y;
  }
  return total;
}

}  // namespace fishlen::testing
