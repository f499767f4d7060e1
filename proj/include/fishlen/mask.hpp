#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <utility>
#include <variant>
#include <vector>

#include "fishlen/error.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Dense binary raster. Foreground is 1, background 0.
class BinaryMask {
public:
  BinaryMask() = default;

  BinaryMask(int width, int height)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0) {
    if (width <= 0 || height <= 0)
      throw ContractError("BinaryMask: dimensions must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                 static_cast<std::size_t>(x)] != 0;
  }

  /// Bounds-checked read; out-of-range counts as background.
  bool at_safe(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
    return at(x, y);
  }

  void set(int x, int y, bool v = true) {
    data_[static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
          static_cast<std::size_t>(x)] = v ? 1 : 0;
  }

  const std::vector<std::uint8_t>& raster() const { return data_; }
  std::vector<std::uint8_t>& raster() { return data_; }

  std::int64_t count() const {
    std::int64_t n = 0;
    for (const auto v : data_) n += v;
    return n;
  }

  bool empty() const { return count() == 0; }

  void union_with(const BinaryMask& other) {
    if (other.width_ != width_ || other.height_ != height_)
      throw ContractError("BinaryMask::union_with: dimension mismatch");
    for (std::size_t i = 0; i < data_.size(); ++i)
      data_[i] = data_[i] | other.data_[i];
  }

  /// Tight bounding box of foreground as (x0, y0, x1, y1), inclusive.
  /// Returns false when the mask is empty.
  bool bounding_box(int& x0, int& y0, int& x1, int& y1) const {
    x0 = width_;
    y0 = height_;
    x1 = -1;
    y1 = -1;
    for (int y = 0; y < height_; ++y) {
      const std::uint8_t* row = &data_[static_cast<std::size_t>(y) *
                                       static_cast<std::size_t>(width_)];
      for (int x = 0; x < width_; ++x) {
        if (!row[x]) continue;
        x0 = std::min(x0, x);
        x1 = std::max(x1, x);
        y0 = std::min(y0, y);
        y1 = std::max(y1, y);
      }
    }
    return x1 >= 0;
  }

  std::vector<Point2i> foreground_pixels() const {
    std::vector<Point2i> out;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        if (at(x, y)) out.push_back({x, y});
    return out;
  }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.data_ == b.data_;
  }

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// One simple polygon, vertices in pixel coordinates.
using Polygon = std::vector<Vec2>;

/// Uncompressed COCO-style run lengths: column-major scan order, counts
/// alternate starting with background.
struct RleCounts {
  int width = 0;
  int height = 0;
  std::vector<std::int64_t> counts;
};

/// Segmentation as carried by annotation and prediction records.
struct Segmentation {
  std::vector<Polygon> polygons;  // used when rle.counts is empty
  RleCounts rle;

  bool is_rle() const { return !rle.counts.empty(); }
};

// ---------------------------------------------------------------------------
// Polygon rasterization (even-odd rule, half-open [a, b) spans over pixel
// centers at integer coordinates).
// ---------------------------------------------------------------------------

inline void fill_polygon(BinaryMask& mask, const Polygon& poly) {
  if (poly.size() < 3)
    throw ContractError("fill_polygon: polygon needs at least 3 vertices");
  const int h = mask.height();
  const int w = mask.width();

  double ymin = std::numeric_limits<double>::max();
  double ymax = std::numeric_limits<double>::lowest();
  for (const auto& p : poly) {
    ymin = std::min(ymin, p.y());
    ymax = std::max(ymax, p.y());
  }
  const int y_start = std::max(0, static_cast<int>(std::ceil(ymin)));
  const int y_end = std::min(h - 1, static_cast<int>(std::floor(ymax)));

  std::vector<double> xs;
  for (int y = y_start; y <= y_end; ++y) {
    xs.clear();
    const double yc = static_cast<double>(y);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Vec2& a = poly[i];
      const Vec2& b = poly[(i + 1) % poly.size()];
      const bool below_a = a.y() <= yc;
      const bool below_b = b.y() <= yc;
      if (below_a == below_b) continue;  // horizontal edges never cross
      xs.push_back(a.x() + (yc - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
    }
    std::sort(xs.begin(), xs.end());
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      int x0 = static_cast<int>(std::ceil(xs[k]));
      int x1 = static_cast<int>(std::ceil(xs[k + 1])) - 1;
      x0 = std::max(x0, 0);
      x1 = std::min(x1, w - 1);
      for (int x = x0; x <= x1; ++x) mask.set(x, y);
    }
  }
}

// ---------------------------------------------------------------------------
// Run-length encoding (COCO uncompressed counts, column-major)
// ---------------------------------------------------------------------------

inline BinaryMask decode_rle(const RleCounts& rle) {
  if (rle.width <= 0 || rle.height <= 0)
    throw ParseError("decode_rle: non-positive dimensions");
  const std::int64_t total =
      static_cast<std::int64_t>(rle.width) * rle.height;
  std::int64_t sum = 0;
  for (const auto c : rle.counts) {
    if (c < 0) throw ParseError("decode_rle: negative run length");
    sum += c;
  }
  if (sum != total)
    throw ParseError("decode_rle: counts sum to " + std::to_string(sum) +
                     ", expected " + std::to_string(total));

  BinaryMask mask(rle.width, rle.height);
  std::int64_t pos = 0;
  bool value = false;  // runs start with background
  for (const auto c : rle.counts) {
    if (value) {
      for (std::int64_t i = pos; i < pos + c; ++i) {
        const int x = static_cast<int>(i / rle.height);
        const int y = static_cast<int>(i % rle.height);
        mask.set(x, y);
      }
    }
    pos += c;
    value = !value;
  }
  return mask;
}

inline RleCounts encode_rle(const BinaryMask& mask) {
  RleCounts rle;
  rle.width = mask.width();
  rle.height = mask.height();
  const std::int64_t total =
      static_cast<std::int64_t>(rle.width) * rle.height;
  bool current = false;
  std::int64_t run = 0;
  for (std::int64_t i = 0; i < total; ++i) {
    const int x = static_cast<int>(i / rle.height);
    const int y = static_cast<int>(i % rle.height);
    const bool v = mask.at(x, y);
    if (v == current) {
      ++run;
    } else {
      rle.counts.push_back(run);
      current = v;
      run = 1;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

/// Rasterizes a segmentation. Multiple polygons are unioned; an RLE stream is
/// decoded as-is and must match the requested dimensions.
inline BinaryMask rasterize(const Segmentation& seg, int width, int height) {
  if (seg.is_rle()) {
    if (seg.rle.width != width || seg.rle.height != height)
      throw ContractError("rasterize: RLE dimensions (" +
                          std::to_string(seg.rle.width) + "x" +
                          std::to_string(seg.rle.height) +
                          ") do not match requested (" + std::to_string(width) +
                          "x" + std::to_string(height) + ")");
    return decode_rle(seg.rle);
  }
  if (seg.polygons.empty())
    throw ContractError("rasterize: empty segmentation");
  BinaryMask mask(width, height);
  for (const auto& poly : seg.polygons) fill_polygon(mask, poly);
  return mask;
}

// ---------------------------------------------------------------------------
// Intersection over union
// ---------------------------------------------------------------------------

inline double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw ContractError("mask_iou: dimension mismatch");
  int ax0, ay0, ax1, ay1, bx0, by0, bx1, by1;
  const bool a_nonempty = a.bounding_box(ax0, ay0, ax1, ay1);
  const bool b_nonempty = b.bounding_box(bx0, by0, bx1, by1);
  if (!a_nonempty && !b_nonempty) return 0.0;
  if (!a_nonempty || !b_nonempty) return 0.0;

  const std::int64_t na = a.count();
  const std::int64_t nb = b.count();
  std::int64_t inter = 0;
  const int x0 = std::max(ax0, bx0), x1 = std::min(ax1, bx1);
  const int y0 = std::max(ay0, by0), y1 = std::min(ay1, by1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (a.at(x, y) && b.at(x, y)) ++inter;

  const std::int64_t uni = na + nb - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

/// Number of 8-connected foreground components.
inline int count_components(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  int components = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * w + x;
      if (!mask.at(x, y) || seen[idx]) continue;
      ++components;
      seen[idx] = 1;
      stack.emplace_back(x, y);
      while (!stack.empty()) {
        const auto [cx, cy] = stack.back();
        stack.pop_back();
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * w + nx;
            if (mask.at(nx, ny) && !seen[nidx]) {
              seen[nidx] = 1;
              stack.emplace_back(nx, ny);
            }
          }
        }
      }
    }
  }
  return components;
}

}  // namespace fishlen
