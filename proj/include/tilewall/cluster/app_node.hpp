#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "tilewall/cluster/frame.hpp"
#include "tilewall/raster.hpp"
#include "tilewall/scene.hpp"

namespace tw::cluster {

struct AppNodeConfig {
  std::uint32_t rank = 0;
  std::uint32_t n_app_nodes = 1;
  DisplayMode mode = DisplayMode::tiled;
  TileGrid grid;
  /// Consecutive triangles bucketed together as one primitive batch.
  std::size_t bucket_batch = 64;
  /// Triangles per DRAW_TRIANGLES inside a display list.
  std::size_t list_chunk = 4096;
  /// Busy time charged before each frame's commands are emitted.
  double simulated_render_sec = 0.0;
};

/// Server viewports for a mode: the grid's tiles, or the full mural for every
/// server when composited.
std::vector<PixelRect> server_viewports(DisplayMode mode, const TileGrid& grid);

/// One application node: holds a scene partition (or a volume) and emits its
/// command stream to every server of one server set.
class AppNode {
 public:
  AppNode(AppNodeConfig config, std::shared_ptr<const ScenePartition> partition, std::vector<wire::ByteSink*> servers);
  AppNode(AppNodeConfig config, std::shared_ptr<const VolumeGrid> volume, std::vector<wire::ByteSink*> servers);

  /// Emits one frame. Geometry is bucketed per batch, or sent once as a
  /// replicated display list and called thereafter when `caching` is set and
  /// the partition is cacheable. Throws ConnectionLost if a server is gone.
  FrameTraffic render_frame(const CameraState& cam, bool caching);

  std::uint32_t frames() const { return frame_no_; }
  const AppNodeConfig& config() const { return config_; }
  const FrameEmitter& emitter() const { return emitter_; }

 private:
  void emit_geometry(const Mat4& view_proj, bool caching);
  void emit_volume(const CameraState& cam);

  AppNodeConfig config_;
  std::shared_ptr<const ScenePartition> partition_;
  std::shared_ptr<const VolumeGrid> volume_;
  std::vector<PixelRect> viewports_;
  FrameEmitter emitter_;
  std::uint32_t frame_no_ = 0;
};

}  // namespace tw::cluster
