#include "tilewall/cluster/frame.hpp"

#include <numeric>
#include <optional>

namespace tw::cluster {

const char* to_string(DisplayMode mode) { return mode == DisplayMode::tiled ? "tiled" : "composited"; }

DisplayMode parse_display_mode(const std::string& name) {
  if (name == "tiled") return DisplayMode::tiled;
  if (name == "composited") return DisplayMode::composited;
  throw std::invalid_argument("unknown display mode '" + name + "'");
}

FrameFlags frame_flags(DisplayMode mode, std::uint32_t rank, std::uint32_t n_app_nodes) {
  if (rank >= n_app_nodes) {
    throw std::out_of_range("rank " + std::to_string(rank) + " out of range for " + std::to_string(n_app_nodes) +
                            " app nodes");
  }
  const bool root = rank == 0;
  return {mode == DisplayMode::composited || root, root};
}

std::uint64_t FrameTraffic::total() const { return std::accumulate(bytes.begin(), bytes.end(), std::uint64_t{0}); }

std::uint64_t FrameTraffic::total_geometry() const {
  return std::accumulate(geometry_bytes.begin(), geometry_bytes.end(), std::uint64_t{0});
}

ConnectionLost::ConnectionLost(std::size_t server, const std::string& why)
    : std::runtime_error("connection to server " + std::to_string(server) + " lost: " + why), server_(server) {}

FrameEmitter::FrameEmitter(std::vector<wire::ByteSink*> sinks)
    : sinks_(std::move(sinks)), mirrors_(sinks_.size()), pending_(sinks_.size()) {
  traffic_.bytes.assign(sinks_.size(), 0);
  traffic_.geometry_bytes.assign(sinks_.size(), 0);
}

std::size_t FrameEmitter::emit(std::size_t server, const wire::Command& cmd) {
  if (wire::track(cmd, mirrors_[server]) == wire::TrackDecision::suppress) return 0;
  const std::size_t n = wire::encode(cmd, pending_[server]);
  traffic_.bytes[server] += n;
  if (wire::is_geometry(cmd)) traffic_.geometry_bytes[server] += n;
  if (pending_[server].size() >= kEmitFlushBytes) send(server);
  return n;
}

void FrameEmitter::send(std::size_t server) {
  Bytes& buf = pending_[server];
  if (buf.empty()) return;
  try {
    sinks_[server]->send(buf);
  } catch (const wire::ChannelClosed& e) {
    buf.clear();
    throw ConnectionLost(server, e.what());
  }
  buf.clear();
}

void FrameEmitter::flush() {
  std::optional<ConnectionLost> first;
  for (std::size_t s = 0; s < sinks_.size(); ++s) {
    try {
      send(s);
    } catch (const ConnectionLost& e) {
      if (!first) first = e;
    }
  }
  if (first) throw *first;
}

void FrameEmitter::emit_all(const wire::Command& cmd) {
  for (std::size_t s = 0; s < sinks_.size(); ++s) emit(s, cmd);
}

bool FrameEmitter::has_list(std::size_t server, std::uint32_t id) const {
  return mirrors_[server].defined_lists.contains(id);
}

FrameTraffic FrameEmitter::take_traffic() {
  FrameTraffic out = traffic_;
  std::fill(traffic_.bytes.begin(), traffic_.bytes.end(), 0);
  std::fill(traffic_.geometry_bytes.begin(), traffic_.geometry_bytes.end(), 0);
  return out;
}

void emit_frame_prologue(FrameEmitter& out, std::uint32_t frame_no, std::uint32_t rank, const FrameFlags& flags,
                         const Mat4& view_proj) {
  out.emit_all(wire::BeginFrame{frame_no, static_cast<std::uint16_t>(rank)});
  if (flags.clear) out.emit_all(wire::Clear{kBackground, 1.0f});
  out.emit_all(wire::Barrier{kPreDrawBarrier});
  out.emit_all(wire::SetCamera{view_proj});
}

void emit_frame_epilogue(FrameEmitter& out, std::uint32_t frame_no, const FrameFlags& flags) {
  out.emit_all(wire::Barrier{kPostDrawBarrier});
  out.emit_all(wire::Swap{!flags.swap_authoritative});
  out.emit_all(wire::EndFrame{frame_no});
  out.flush();
}

}  // namespace tw::cluster
