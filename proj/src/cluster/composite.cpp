#include "tilewall/cluster/composite.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <vector>

namespace tw::cluster {

Framebuffer assemble_tiles(const TileGrid& grid, std::span<const Framebuffer> tiles) {
  if (tiles.size() != static_cast<std::size_t>(grid.count())) {
    throw std::invalid_argument("tile count does not match the grid");
  }
  Framebuffer mural(grid.mural());
  for (int i = 0; i < grid.count(); ++i) {
    const Framebuffer& tile = tiles[static_cast<std::size_t>(i)];
    const PixelRect rect = grid.tile(i).rect;
    if (!(tile.area() == rect)) throw std::invalid_argument("tile framebuffer does not match its grid rectangle");
    for (int y = rect.y; y < rect.y + rect.h; ++y) {
      const auto src = static_cast<std::ptrdiff_t>(tile.index(rect.x, y));
      const auto dst = static_cast<std::ptrdiff_t>(mural.index(rect.x, y));
      std::copy_n(tile.color().begin() + src, rect.w, mural.color().begin() + dst);
      std::copy_n(tile.depth().begin() + src, rect.w, mural.depth().begin() + dst);
    }
  }
  return mural;
}

Framebuffer composite_depth(std::span<const RankedFrame> frames) {
  if (frames.empty()) throw std::invalid_argument("nothing to composite");
  std::vector<RankedFrame> ordered(frames.begin(), frames.end());
  std::sort(ordered.begin(), ordered.end(), [](const RankedFrame& a, const RankedFrame& b) { return a.rank < b.rank; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i].rank == ordered[i - 1].rank) throw std::invalid_argument("duplicate rank in composite");
    if (!(ordered[i].frame->area() == ordered[0].frame->area())) {
      throw std::invalid_argument("composited frames differ in dimensions");
    }
  }

  Framebuffer out = *ordered[0].frame;
  auto color = out.color();
  auto depth = out.depth();
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    const auto src_color = ordered[i].frame->color();
    const auto src_depth = ordered[i].frame->depth();
    for (std::size_t p = 0; p < depth.size(); ++p) {
      if (src_depth[p] < depth[p]) {
        depth[p] = src_depth[p];
        color[p] = src_color[p];
      }
    }
  }
  return out;
}

}  // namespace tw::cluster
