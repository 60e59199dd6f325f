#pragma once

#include <optional>
#include <vector>

#include "tilewall/raster.hpp"

namespace tw::wire {

/// Screen-space bounds of projected geometry, in mural pixels.
struct ScreenAabb {
  float min_x = 0.0f;
  float min_y = 0.0f;
  float max_x = 0.0f;
  float max_y = 0.0f;

  void extend(const ScreenAabb& o);
};

ScreenAabb screen_bounds(const ScreenTriangle& tri);

/// Tiles whose rectangle intersects `bounds` (padded by one pixel to cover
/// subpixel snapping). Culled geometry (nullopt) and bounds entirely off the
/// mural bucket to the empty set. Result is sorted row-major.
std::vector<TileId> bucket(const std::optional<ScreenAabb>& bounds, const TileGrid& grid);

}  // namespace tw::wire
