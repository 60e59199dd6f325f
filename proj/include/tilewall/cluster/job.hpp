#pragma once

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tilewall/cluster/app_node.hpp"
#include "tilewall/cluster/frame.hpp"
#include "tilewall/cluster/tile_server.hpp"
#include "tilewall/interact/master.hpp"
#include "tilewall/scene.hpp"
#include "tilewall/wire/transport.hpp"

namespace tw::cluster {

/// What every app node loads. All nodes build the same global scene and keep
/// their own partition.
struct SceneSpec {
  enum class Kind { sphere, synthetic, stl, volume };
  Kind kind = Kind::sphere;
  std::size_t bytes = 1u << 20;
  std::uint64_t seed = 1;
  std::string path;
  std::array<std::uint32_t, 3> dims{32, 32, 32};
  PartitionStrategy partition = PartitionStrategy::contiguous;
  bool cacheable = true;

  bool is_volume() const { return kind == Kind::volume; }
};

const char* to_string(SceneSpec::Kind kind);
SceneSpec::Kind parse_scene_kind(const std::string& name);

Mesh build_mesh(const SceneSpec& spec);
std::vector<ScenePartition> build_partitions(const SceneSpec& spec, std::size_t n);
std::shared_ptr<const VolumeGrid> build_volume(const SceneSpec& spec);

struct JobConfig {
  DisplayMode mode = DisplayMode::tiled;
  std::uint32_t app_nodes = 4;
  int tile_rows = 2;
  int tile_cols = 2;
  int tile_width = 256;
  int tile_height = 256;
  std::optional<wire::ThrottleSpec> throttle;
  bool caching = false;
  std::string master_addr = "127.0.0.1:7400";
  std::vector<std::string> server_addrs;
  std::string ui_addr;
  double watchdog_sec = 30.0;
  std::size_t bucket_batch = 64;
  double render_cost_sec = 0.0;
  SceneSpec scene;

  TileGrid grid() const { return {tile_rows, tile_cols, tile_width, tile_height}; }
  std::size_t servers() const { return static_cast<std::size_t>(tile_rows) * static_cast<std::size_t>(tile_cols); }
  /// server_addrs, or 127.0.0.1 ports following master_addr's when empty.
  std::vector<std::string> resolved_server_addrs() const;
};

/// One mural frame completed by every server of the active set.
struct JobFrame {
  std::uint64_t index = 0;
  DisplayMode mode = DisplayMode::tiled;
  Framebuffer image;
  /// Bytes sent to each server of the active set, summed over app nodes.
  FrameTraffic traffic;
  wire::Clock::time_point completed;
};

struct LocalJobOptions {
  CameraState initial_camera;
  /// Each app node draws frame 0 with the initial camera before listening.
  bool render_initial_frame = true;
  /// Build server sets for both modes so SET_MODE switches live.
  bool both_modes = false;
  bool coalesce_moves = false;
  bool record_server_logs = false;
  std::function<void(const std::string&)> on_diagnostic;
  /// Called from a server thread for every completed frame.
  std::function<void(const JobFrame&)> on_frame;
};

/// Master, app nodes and tile servers in one process, connected by in-memory
/// channels. Links from app nodes to servers share one throttled medium when
/// the config sets a throttle.
class LocalJob {
 public:
  LocalJob(JobConfig config, std::vector<ScenePartition> partitions, LocalJobOptions options = {});
  LocalJob(JobConfig config, std::shared_ptr<const VolumeGrid> volume, LocalJobOptions options = {});
  ~LocalJob();
  LocalJob(const LocalJob&) = delete;
  LocalJob& operator=(const LocalJob&) = delete;

  interact::ApplyResult post(const interact::EventMsg& e);
  interact::ApplyResult post_burst(std::span<const interact::EventMsg> burst);

  /// Oldest completed frame not yet taken, waiting up to `timeout`.
  std::optional<JobFrame> next_frame(std::chrono::milliseconds timeout);

  /// Broadcasts QUIT and joins every role. Idempotent.
  void quit();

  const interact::InteractionSession& session() const { return master_->session(); }
  const JobConfig& config() const { return config_; }
  std::vector<std::string> diagnostics() const;
  /// Available after quit().
  const std::vector<interact::SlaveReport>& slave_reports() const { return reports_; }
  const std::vector<CameraState>& slave_cameras() const { return slave_cameras_; }
  TileServer& server(DisplayMode mode, std::size_t index);
  std::uint64_t aborted_frames() const;

 private:
  struct ServerSet {
    std::vector<std::unique_ptr<TileServerHost>> hosts;
    // [rank][server]
    std::vector<std::vector<std::unique_ptr<wire::ByteSink>>> sinks;
    std::vector<std::unique_ptr<AppNode>> nodes;
  };
  struct Pending {
    std::vector<std::optional<Framebuffer>> images;
    FrameTraffic traffic;
    std::uint32_t traffic_reports = 0;
  };

  void start(const std::function<std::unique_ptr<AppNode>(DisplayMode, std::uint32_t, std::vector<wire::ByteSink*>)>&
                 make_node);
  void on_present(DisplayMode mode, std::size_t server, const PresentedFrame& frame);
  void on_traffic(DisplayMode mode, std::uint64_t index, const FrameTraffic& traffic);
  void try_complete(DisplayMode mode, std::uint64_t index);
  void diagnose(const std::string& msg);
  void app_main(std::uint32_t rank, std::unique_ptr<wire::ByteSource> events);

  JobConfig config_;
  LocalJobOptions options_;
  std::shared_ptr<wire::ThrottledLink> link_;
  std::map<DisplayMode, ServerSet> sets_;
  std::unique_ptr<interact::Master> master_;
  std::vector<std::thread> app_threads_;
  std::vector<interact::SlaveReport> reports_;
  std::vector<CameraState> slave_cameras_;

  mutable std::mutex mu_;
  std::condition_variable frame_cv_;
  std::map<std::pair<DisplayMode, std::uint64_t>, Pending> pending_;
  std::deque<JobFrame> completed_;
  std::vector<std::string> diagnostics_;
  bool quit_done_ = false;
};

}  // namespace tw::cluster
