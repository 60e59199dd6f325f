#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tilewall/wire/codec.hpp"
#include "tilewall/wire/tracking.hpp"
#include "tilewall/wire/transport.hpp"

namespace tw::cluster {

enum class DisplayMode : std::uint8_t { tiled = 0, composited = 1 };

const char* to_string(DisplayMode mode);
DisplayMode parse_display_mode(const std::string& name);

/// Per-rank clear/swap authority for one frame.
struct FrameFlags {
  bool clear = false;
  bool swap_authoritative = false;

  friend bool operator==(const FrameFlags&, const FrameFlags&) = default;
};

/// Composited: every rank clears, rank 0 swaps. Tiled: rank 0 clears and swaps.
FrameFlags frame_flags(DisplayMode mode, std::uint32_t rank, std::uint32_t n_app_nodes);

/// Barrier before the draws (clears are applied at its release) and after them.
inline constexpr std::uint32_t kPreDrawBarrier = 1;
inline constexpr std::uint32_t kPostDrawBarrier = 2;
/// Display list id an app node stores its partition under.
inline constexpr std::uint32_t kSceneList = 1;

/// Bytes sent to each server during one frame.
struct FrameTraffic {
  std::vector<std::uint64_t> bytes;
  std::vector<std::uint64_t> geometry_bytes;

  std::uint64_t total() const;
  std::uint64_t total_geometry() const;
};

/// A send failed; the frame is aborted.
class ConnectionLost : public std::runtime_error {
 public:
  ConnectionLost(std::size_t server, const std::string& why);
  std::size_t server() const { return server_; }

 private:
  std::size_t server_;
};

/// Buffered bytes per server that trigger a send mid-frame.
inline constexpr std::size_t kEmitFlushBytes = 64 * 1024;

/// State-tracked command output to a fixed set of servers, with byte accounting.
/// Commands are buffered per server and sent once kEmitFlushBytes accumulate
/// or on flush(); a frame's control commands thus travel in few messages.
class FrameEmitter {
 public:
  explicit FrameEmitter(std::vector<wire::ByteSink*> sinks);

  std::size_t servers() const { return sinks_.size(); }
  /// Returns the bytes queued, 0 when state tracking suppressed the command.
  std::size_t emit(std::size_t server, const wire::Command& cmd);
  void emit_all(const wire::Command& cmd);
  /// Sends everything buffered. Every server is attempted; the first failure
  /// is rethrown as ConnectionLost.
  void flush();

  bool has_list(std::size_t server, std::uint32_t id) const;
  const wire::ServerStateMirror& mirror(std::size_t server) const { return mirrors_[server]; }

  /// Traffic accumulated since the previous call.
  FrameTraffic take_traffic();

 private:
  std::vector<wire::ByteSink*> sinks_;
  std::vector<wire::ServerStateMirror> mirrors_;
  void send(std::size_t server);

  FrameTraffic traffic_;
  std::vector<Bytes> pending_;
};

/// BEGIN_FRAME, CLEAR (if flagged), pre-draw BARRIER and SET_CAMERA to every server.
void emit_frame_prologue(FrameEmitter& out, std::uint32_t frame_no, std::uint32_t rank, const FrameFlags& flags,
                         const Mat4& view_proj);
/// Post-draw BARRIER, SWAP (suppressed unless authoritative) and END_FRAME to
/// every server, then flushes.
void emit_frame_epilogue(FrameEmitter& out, std::uint32_t frame_no, const FrameFlags& flags);

}  // namespace tw::cluster
