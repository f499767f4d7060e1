#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <vector>

#include "fishlen/error.hpp"
#include "fishlen/mask.hpp"
#include "fishlen/types.hpp"

namespace fishlen {

/// Thin medial representation of a mask: the foreground pixel set that
/// survives two-subiteration thinning.
struct Skeleton {
  int width = 0;
  int height = 0;
  std::vector<Point2i> pixels;  // sorted by (y, x)

  BinaryMask to_mask() const {
    BinaryMask m(width, height);
    for (const auto& p : pixels) m.set(p.x, p.y);
    return m;
  }
};

namespace detail {

// Neighborhood code bit layout, clockwise from north:
// bit0 N, bit1 NE, bit2 E, bit3 SE, bit4 S, bit5 SW, bit6 W, bit7 NW.
inline int thinning_transitions(unsigned code) {
  int a = 0;
  for (int i = 0; i < 8; ++i) {
    const unsigned cur = (code >> i) & 1u;
    const unsigned nxt = (code >> ((i + 1) % 8)) & 1u;
    if (cur == 0 && nxt == 1) ++a;
  }
  return a;
}

struct ThinningTables {
  std::array<std::uint8_t, 256> pass1{};
  std::array<std::uint8_t, 256> pass2{};

  ThinningTables() {
    for (unsigned code = 0; code < 256; ++code) {
      const int b = std::popcount(code);
      const int a = thinning_transitions(code);
      const bool n = code & 1u;          // P2
      const bool e = (code >> 2) & 1u;   // P4
      const bool s = (code >> 4) & 1u;   // P6
      const bool w = (code >> 6) & 1u;   // P8
      const bool base = (b >= 2 && b <= 6 && a == 1);
      pass1[code] = base && !(n && e && s) && !(e && s && w) ? 1 : 0;
      pass2[code] = base && !(n && e && w) && !(n && s && w) ? 1 : 0;
    }
  }
};

inline const ThinningTables& thinning_tables() {
  static const ThinningTables tables;
  return tables;
}

}  // namespace detail

/// Two-subiteration parallel thinning. Both subiterations evaluate their rule
/// on a frozen copy of the raster; iteration stops when a full pass deletes
/// nothing. Only boundary pixels are tracked: a pixel with all eight
/// neighbors set fails the B <= 6 condition, so it cannot become deletable
/// until one of its neighbors is removed.
///
/// Anchor rule: the plain parallel rules erase an isolated 2x2 square (and
/// shapes that reduce to one) entirely, losing the component. A flagged pixel
/// whose surviving neighborhood would be empty is therefore kept; candidates
/// are visited in raster order, so exactly one anchor per vanishing cluster
/// survives and the component count is preserved.
inline Skeleton skeletonize(const BinaryMask& mask) {
  if (mask.empty()) throw ContractError("skeletonize: empty mask");

  const int w = mask.width();
  const int h = mask.height();
  const auto& tables = detail::thinning_tables();

  // Padded working raster: no bounds checks in the neighborhood reads.
  const int pw = w + 2;
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(pw) * (h + 2), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(x, y))
        buf[static_cast<std::size_t>(y + 1) * pw + (x + 1)] = 1;

  const auto code_at = [&](std::int32_t i) -> unsigned {
    return buf[i - pw] | (buf[i - pw + 1] << 1) | (buf[i + 1] << 2) |
           (buf[i + pw + 1] << 3) | (buf[i + pw] << 4) |
           (buf[i + pw - 1] << 5) | (buf[i - 1] << 6) |
           (buf[i - pw - 1] << 7);
  };

  std::vector<std::int32_t> active;
  std::vector<std::uint8_t> queued(buf.size(), 0);
  for (int y = 1; y <= h; ++y) {
    for (int x = 1; x <= w; ++x) {
      const std::int32_t i = y * pw + x;
      if (buf[i] && code_at(i) != 255u) {
        active.push_back(i);
        queued[static_cast<std::size_t>(i)] = 1;
      }
    }
  }

  const std::int32_t offsets[8] = {-pw,     -pw + 1, 1,  pw + 1,
                                   pw,      pw - 1,  -1, -pw - 1};
  std::vector<std::int32_t> to_delete;
  std::vector<std::uint8_t> flagged(buf.size(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      const auto& table = pass == 0 ? tables.pass1 : tables.pass2;
      to_delete.clear();
      for (const auto i : active)
        if (buf[i] && table[code_at(i)]) to_delete.push_back(i);
      if (to_delete.empty()) continue;

      // Anchor rule, in raster order: keep a pixel whose set neighbors are
      // all flagged as well, so no component disappears within one pass.
      std::sort(to_delete.begin(), to_delete.end());
      for (const auto i : to_delete) flagged[static_cast<std::size_t>(i)] = 1;
      std::erase_if(to_delete, [&](std::int32_t i) {
        bool survivor = false;
        for (const auto off : offsets)
          if (buf[i + off] && !flagged[static_cast<std::size_t>(i + off)]) {
            survivor = true;
            break;
          }
        if (!survivor) flagged[static_cast<std::size_t>(i)] = 0;  // kept
        return !survivor;
      });
      for (const auto i : to_delete) flagged[static_cast<std::size_t>(i)] = 0;
      if (to_delete.empty()) continue;
      changed = true;
      for (const auto i : to_delete) buf[i] = 0;
      for (const auto i : to_delete) {
        queued[static_cast<std::size_t>(i)] = 0;
        for (const auto off : offsets) {
          const std::int32_t j = i + off;
          if (buf[j] && !queued[static_cast<std::size_t>(j)]) {
            queued[static_cast<std::size_t>(j)] = 1;
            active.push_back(j);
          }
        }
      }
      std::erase_if(active, [&](std::int32_t i) { return buf[i] == 0; });
    }
  }

  Skeleton skel;
  skel.pixels.reserve(active.size());
  skel.width = w;
  skel.height = h;
  for (int y = 1; y <= h; ++y)
    for (int x = 1; x <= w; ++x)
      if (buf[static_cast<std::size_t>(y) * pw + x])
        skel.pixels.push_back({x - 1, y - 1});
  return skel;
}

}  // namespace fishlen
