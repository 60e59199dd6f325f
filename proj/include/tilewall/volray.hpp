#pragma once

#include <cstdint>
#include <vector>

#include "tilewall/raster.hpp"
#include "tilewall/scene.hpp"
#include "tilewall/wire/codec.hpp"

namespace tw::volray {

/// Half the edge of the volume's largest-resolution voxel, with the volume
/// scaled into the unit cube [-0.5, 0.5]^3.
double default_step(const VolumeGrid& vol);

/// Maximum-intensity projection of `region` (mural pixels). Each pixel-center
/// ray samples at t = k * step from the eye, nearest-neighbour, and keeps the
/// largest voxel value; rays that miss the cube yield 0. Evaluated in double.
/// Output is row-major, region.w * region.h bytes.
std::vector<std::uint8_t> raycast_mip(const VolumeGrid& vol, const CameraState& cam, const PixelRect& region,
                                      int mural_w, int mural_h, double step);

/// Horizontal band of the mural rendered by `rank` of `n`.
PixelRect band(std::uint32_t rank, std::uint32_t n, int mural_w, int mural_h);

/// Grayscale band as BLIT_IMAGE commands, one per rectangle in `targets`
/// (each clipped to the band; empty intersections produce no command).
std::vector<wire::BlitImage> band_blits(const std::vector<std::uint8_t>& gray, const PixelRect& band,
                                        const std::vector<PixelRect>& targets);

}  // namespace tw::volray
