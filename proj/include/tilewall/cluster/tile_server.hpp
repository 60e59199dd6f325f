#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "tilewall/raster.hpp"
#include "tilewall/wire/codec.hpp"
#include "tilewall/wire/tracking.hpp"
#include "tilewall/wire/transport.hpp"

namespace tw::cluster {

/// One synchronization point shared by all senders of a server.
class BarrierEpoch {
 public:
  BarrierEpoch(std::uint32_t barrier_id, std::uint32_t size) : barrier_id_(barrier_id), size_(size) {}

  /// Records an arrival; returns true when this arrival releases the barrier.
  /// Throws ProtocolError for an out-of-range rank or a second arrival.
  bool arrive(std::uint32_t rank);

  std::uint32_t barrier_id() const { return barrier_id_; }
  std::uint32_t size() const { return size_; }
  const std::set<std::uint32_t>& arrivals() const { return arrivals_; }
  bool released() const { return arrivals_.size() == size_; }

 private:
  std::uint32_t barrier_id_;
  std::uint32_t size_;
  std::set<std::uint32_t> arrivals_;
};

struct TileServerConfig {
  /// Mural region this server owns (a tile, or the whole mural when composited).
  PixelRect viewport;
  int mural_w = 0;
  int mural_h = 0;
  std::uint32_t n_senders = 1;
  std::chrono::milliseconds watchdog{30000};
  /// Keep an event log of barrier arrivals/releases, clears and draws.
  bool record_log = false;
};

struct PresentedFrame {
  std::uint64_t present_no = 0;
  std::uint32_t frame_no = 0;
  Framebuffer image;
};

struct ServerLogEntry {
  enum class Kind { arrive, release, clear, draw, swap, present };
  Kind kind;
  std::uint64_t epoch;
  std::uint32_t sender;
  /// swap only: the SWAP was not suppressed.
  bool authoritative = false;
};

/// Frame protocol state machine of one tile server.
///
/// All senders draw into one framebuffer with a per-pixel owner rank, so a
/// pixel ends up with the nearest fragment and depth ties go to the lowest
/// rank, independent of how the senders' streams interleave. Commands behind
/// an unreleased barrier are queued per sender. CLEARs are collected and applied to every layer when
/// the next barrier releases. The frame presents once all senders have sent
/// SWAP and exactly one of them was not suppressed.
class TileServer {
 public:
  using PresentFn = std::function<void(const PresentedFrame&)>;

  TileServer(TileServerConfig config, PresentFn on_present);

  /// Feeds one decoded command. On a protocol violation the current frame is
  /// aborted (every sender skips to its next BEGIN_FRAME) and ProtocolError
  /// is rethrown. Thread-safe.
  void on_command(std::uint32_t sender, wire::Command cmd, wire::Clock::time_point now = wire::Clock::now());

  /// Diagnostic if the current frame has waited longer than the watchdog for
  /// SWAPs. Fires once per frame.
  std::optional<std::string> check_watchdog(wire::Clock::time_point now = wire::Clock::now());

  std::uint64_t presentations() const;
  std::uint64_t aborted_frames() const;
  std::set<std::uint32_t> defined_lists(std::uint32_t sender) const;
  std::vector<ServerLogEntry> log() const;
  const TileServerConfig& config() const { return config_; }

 private:
  struct Sender {
    std::deque<wire::Command> pending;
    bool blocked = false;
    bool skipping = false;
    bool swapped = false;
    std::optional<Mat4> camera;
    wire::ListStore lists;
  };

  void execute(std::uint32_t sender, wire::Command& cmd, wire::Clock::time_point now);
  void drain();
  void release_barrier();
  void present();
  void abort_frame();
  void note(ServerLogEntry::Kind kind, std::uint32_t sender);

  TileServerConfig config_;
  PresentFn on_present_;
  mutable std::mutex mu_;
  std::vector<Sender> senders_;
  Framebuffer image_;
  std::vector<std::uint32_t> owner_;
  std::optional<BarrierEpoch> barrier_;
  std::uint64_t epoch_ = 0;
  std::vector<std::optional<wire::Clear>> pending_clears_;
  std::uint32_t swaps_ = 0;
  std::uint32_t authoritative_swaps_ = 0;
  std::uint32_t frame_no_ = 0;
  std::optional<wire::Clock::time_point> frame_started_;
  bool watchdog_fired_ = false;
  std::uint64_t presented_ = 0;
  std::uint64_t aborted_ = 0;
  std::vector<ServerLogEntry> log_;
};

/// Runs a TileServer over network connections: one decode thread per sender
/// feeding the shared server, plus a watchdog thread.
class TileServerHost {
 public:
  using DiagnosticFn = std::function<void(const std::string&)>;

  TileServerHost(std::unique_ptr<TileServer> server, std::vector<std::unique_ptr<wire::ByteSource>> connections,
                 DiagnosticFn on_diagnostic = {});
  ~TileServerHost();
  TileServerHost(const TileServerHost&) = delete;
  TileServerHost& operator=(const TileServerHost&) = delete;

  /// Blocks until every connection has reached end of stream.
  void join();
  TileServer& server() { return *server_; }

 private:
  void read_loop(std::uint32_t sender);

  std::unique_ptr<TileServer> server_;
  std::vector<std::unique_ptr<wire::ByteSource>> connections_;
  DiagnosticFn on_diagnostic_;
  std::vector<std::thread> readers_;
  std::thread watchdog_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t open_ = 0;
};

}  // namespace tw::cluster
