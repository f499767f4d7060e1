#pragma once

// Independent reference for the two-subiteration thinning rules, kept as a
// literal transcription: explicit neighbor array P2..P9 (clockwise from
// north), transition count A, neighbor count B, and the four conditions per
// subiteration, plus the anchor rule that keeps one pixel of a cluster whose
// members would all be deleted in a single pass (plain parallel rules erase
// isolated 2x2 squares outright). Used only to cross-check the library
// implementation.

#include <utility>
#include <vector>

#include "fishlen/mask.hpp"

namespace fishlen::testing {

inline BinaryMask reference_thinning(const BinaryMask& input) {
  const int w = input.width();
  const int h = input.height();
  std::vector<std::vector<int>> grid(h, std::vector<int>(w, 0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) grid[y][x] = input.at(x, y) ? 1 : 0;

  const auto value = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0;
    return grid[y][x];
  };

  bool changed = true;
  while (changed) {
    changed = false;
    for (int subiteration = 1; subiteration <= 2; ++subiteration) {
      std::vector<std::pair<int, int>> deletions;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!grid[y][x]) continue;
          const int p2 = value(x, y - 1);
          const int p3 = value(x + 1, y - 1);
          const int p4 = value(x + 1, y);
          const int p5 = value(x + 1, y + 1);
          const int p6 = value(x, y + 1);
          const int p7 = value(x - 1, y + 1);
          const int p8 = value(x - 1, y);
          const int p9 = value(x - 1, y - 1);

          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;

          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (seq[i] == 0 && seq[i + 1] == 1) ++a;
          if (a != 1) continue;

          if (subiteration == 1) {
            if (p2 * p4 * p6 != 0) continue;
            if (p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0) continue;
            if (p2 * p6 * p8 != 0) continue;
          }
          deletions.emplace_back(x, y);
        }
      }

      // Anchor rule: visiting candidates in raster order, keep any pixel
      // whose set neighbors are all scheduled for deletion too.
      std::vector<std::vector<int>> flagged(h, std::vector<int>(w, 0));
      for (const auto& [x, y] : deletions) flagged[y][x] = 1;
      std::vector<std::pair<int, int>> kept_deletions;
      for (const auto& [x, y] : deletions) {
        bool survivor = false;
        for (int dy = -1; dy <= 1 && !survivor; ++dy)
          for (int dx = -1; dx <= 1 && !survivor; ++dx) {
            if (dx == 0 && dy == 0) continue;
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (grid[ny][nx] == 1 && !flagged[ny][nx]) survivor = true;
          }
        if (survivor) {
          kept_deletions.emplace_back(x, y);
        } else {
          flagged[y][x] = 0;  // anchor survives
        }
      }

      for (const auto& [x, y] : kept_deletions) grid[y][x] = 0;
      if (!kept_deletions.empty()) changed = true;
    }
  }

  BinaryMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (grid[y][x]) out.set(x, y);
  return out;
}

}  // namespace fishlen::testing
