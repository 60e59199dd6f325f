#pragma once

#include <cstdint>
#include <span>

#include "tilewall/raster.hpp"

namespace tw::cluster {

/// Places each tile (row-major order) at its rectangle. Each framebuffer's
/// area must equal the grid's rectangle for that tile.
Framebuffer assemble_tiles(const TileGrid& grid, std::span<const Framebuffer> tiles);

struct RankedFrame {
  std::uint32_t rank = 0;
  const Framebuffer* frame = nullptr;
};

/// Per pixel, the fragment with the smallest depth; exact ties go to the
/// lowest rank.
Framebuffer composite_depth(std::span<const RankedFrame> frames);

}  // namespace tw::cluster
