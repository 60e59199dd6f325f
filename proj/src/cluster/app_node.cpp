#include "tilewall/cluster/app_node.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

#include "tilewall/volray.hpp"
#include "tilewall/wire/bucket.hpp"

namespace tw::cluster {

std::vector<PixelRect> server_viewports(DisplayMode mode, const TileGrid& grid) {
  std::vector<PixelRect> out;
  for (int i = 0; i < grid.count(); ++i) out.push_back(mode == DisplayMode::tiled ? grid.tile(i).rect : grid.mural());
  return out;
}

namespace {

void check_servers(const AppNodeConfig& config, std::size_t n_servers) {
  if (config.rank >= config.n_app_nodes) {
    throw std::out_of_range("rank " + std::to_string(config.rank) + " out of range for " +
                            std::to_string(config.n_app_nodes) + " app nodes");
  }
  if (n_servers != static_cast<std::size_t>(config.grid.count())) {
    throw std::invalid_argument("expected " + std::to_string(config.grid.count()) + " server connections, got " +
                                std::to_string(n_servers));
  }
  if (config.bucket_batch == 0 || config.list_chunk == 0) {
    throw std::invalid_argument("bucket batch and list chunk must be positive");
  }
}

}  // namespace

AppNode::AppNode(AppNodeConfig config, std::shared_ptr<const ScenePartition> partition,
                 std::vector<wire::ByteSink*> servers)
    : config_(config), partition_(std::move(partition)), viewports_(server_viewports(config.mode, config.grid)),
      emitter_(servers) {
  check_servers(config_, servers.size());
}

AppNode::AppNode(AppNodeConfig config, std::shared_ptr<const VolumeGrid> volume, std::vector<wire::ByteSink*> servers)
    : config_(config), volume_(std::move(volume)), viewports_(server_viewports(config.mode, config.grid)),
      emitter_(servers) {
  check_servers(config_, servers.size());
}

FrameTraffic AppNode::render_frame(const CameraState& cam, bool caching) {
  validate(cam);
  if (config_.simulated_render_sec > 0.0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(config_.simulated_render_sec));
  }
  const FrameFlags flags = frame_flags(config_.mode, config_.rank, config_.n_app_nodes);
  const std::uint32_t frame_no = frame_no_++;
  const Mat4 view_proj = camera_matrix(cam, config_.grid.mural_w(), config_.grid.mural_h());
  emit_frame_prologue(emitter_, frame_no, config_.rank, flags, view_proj);
  if (volume_) {
    emit_volume(cam);
  } else {
    emit_geometry(view_proj, caching);
  }
  emit_frame_epilogue(emitter_, frame_no, flags);
  return emitter_.take_traffic();
}

void AppNode::emit_geometry(const Mat4& view_proj, bool caching) {
  const std::vector<Triangle>& tris = partition_->mesh.triangles();
  if (tris.empty()) return;
  const std::size_t n_servers = emitter_.servers();

  if (caching && partition_->cacheable) {
    for (std::size_t s = 0; s < n_servers; ++s) {
      if (emitter_.has_list(s, kSceneList)) continue;
      wire::DefineList list{kSceneList, {}};
      for (std::size_t i = 0; i < tris.size(); i += config_.list_chunk) {
        const std::size_t end = std::min(tris.size(), i + config_.list_chunk);
        list.draws.push_back({std::vector<Triangle>(tris.begin() + static_cast<std::ptrdiff_t>(i),
                                                    tris.begin() + static_cast<std::ptrdiff_t>(end))});
      }
      emitter_.emit(s, list);
    }
    emitter_.emit_all(wire::CallList{kSceneList});
    return;
  }

  const int mural_w = config_.grid.mural_w();
  const int mural_h = config_.grid.mural_h();
  const TileGrid whole{1, 1, mural_w, mural_h};
  wire::DrawTriangles batch;
  for (std::size_t i = 0; i < tris.size(); i += config_.bucket_batch) {
    const std::size_t end = std::min(tris.size(), i + config_.bucket_batch);
    std::optional<wire::ScreenAabb> bounds;
    for (std::size_t t = i; t < end; ++t) {
      const auto st = project_triangle(view_proj, tris[t], mural_w, mural_h);
      if (!st) continue;
      const wire::ScreenAabb b = wire::screen_bounds(*st);
      if (bounds) {
        bounds->extend(b);
      } else {
        bounds = b;
      }
    }
    std::vector<std::size_t> targets;
    if (config_.mode == DisplayMode::tiled) {
      for (const TileId id : wire::bucket(bounds, config_.grid)) targets.push_back(config_.grid.index(id));
    } else if (!wire::bucket(bounds, whole).empty()) {
      for (std::size_t s = 0; s < n_servers; ++s) targets.push_back(s);
    }
    if (targets.empty()) continue;
    batch.triangles.assign(tris.begin() + static_cast<std::ptrdiff_t>(i), tris.begin() + static_cast<std::ptrdiff_t>(end));
    for (std::size_t s : targets) emitter_.emit(s, batch);
  }
}

void AppNode::emit_volume(const CameraState& cam) {
  const int mural_w = config_.grid.mural_w();
  const int mural_h = config_.grid.mural_h();
  const PixelRect rows = volray::band(config_.rank, config_.n_app_nodes, mural_w, mural_h);
  if (rows.empty()) return;
  const auto gray = volray::raycast_mip(*volume_, cam, rows, mural_w, mural_h, volray::default_step(*volume_));
  for (std::size_t s = 0; s < emitter_.servers(); ++s) {
    for (const wire::BlitImage& blit : volray::band_blits(gray, rows, {viewports_[s]})) emitter_.emit(s, blit);
  }
}

}  // namespace tw::cluster
