#include "tilewall/wire/bucket.hpp"

#include <algorithm>
#include <cmath>

namespace tw::wire {

void ScreenAabb::extend(const ScreenAabb& o) {
  min_x = std::min(min_x, o.min_x);
  min_y = std::min(min_y, o.min_y);
  max_x = std::max(max_x, o.max_x);
  max_y = std::max(max_y, o.max_y);
}

ScreenAabb screen_bounds(const ScreenTriangle& tri) {
  return {std::min({tri[0].x, tri[1].x, tri[2].x}), std::min({tri[0].y, tri[1].y, tri[2].y}),
          std::max({tri[0].x, tri[1].x, tri[2].x}), std::max({tri[0].y, tri[1].y, tri[2].y})};
}

std::vector<TileId> bucket(const std::optional<ScreenAabb>& bounds, const TileGrid& grid) {
  std::vector<TileId> out;
  if (!bounds) return out;
  // Inclusive pixel range that any covered pixel center can fall in.
  const int x0 = static_cast<int>(std::floor(bounds->min_x)) - 1;
  const int y0 = static_cast<int>(std::floor(bounds->min_y)) - 1;
  const int x1 = static_cast<int>(std::ceil(bounds->max_x)) + 1;
  const int y1 = static_cast<int>(std::ceil(bounds->max_y)) + 1;
  if (x1 < 0 || y1 < 0 || x0 >= grid.mural_w() || y0 >= grid.mural_h()) return out;

  const int c0 = std::max(0, x0) / grid.tile_w;
  const int c1 = std::min(grid.mural_w() - 1, x1) / grid.tile_w;
  const int r0 = std::max(0, y0) / grid.tile_h;
  const int r1 = std::min(grid.mural_h() - 1, y1) / grid.tile_h;
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) out.push_back({r, c});
  }
  return out;
}

}  // namespace tw::wire
