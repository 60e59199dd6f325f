#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>

#include "tilewall/wire/codec.hpp"

namespace tw::wire {

/// Sender-side copy of the state one server holds for this connection.
struct ServerStateMirror {
  std::optional<Mat4> last_camera;
  /// CLEAR already issued in the current frame; reset by BEGIN_FRAME.
  std::optional<Clear> last_clear;
  std::set<std::uint32_t> defined_lists;

  friend bool operator==(const ServerStateMirror&, const ServerStateMirror&) = default;
};

enum class TrackDecision { send, suppress };

/// Decides whether `cmd` must reach the server, then updates the mirror.
/// Redundant SET_CAMERA, a repeated CLEAR within one frame, and DEFINE_LIST of
/// an id the server already holds are suppressed.
TrackDecision track(const Command& cmd, ServerStateMirror& mirror);

/// Effect of a delivered command on the server state the mirror describes.
void apply(const Command& cmd, ServerStateMirror& mirror);

using DisplayList = DefineList;

/// Server-side store of the display lists one sender has defined.
class ListStore {
 public:
  /// Lists are immutable: redefining an id with different content throws.
  void define(DisplayList list);
  /// Throws ProtocolError for an unknown id.
  const DisplayList& call(std::uint32_t id) const;
  bool contains(std::uint32_t id) const { return lists_.contains(id); }
  std::set<std::uint32_t> ids() const;

 private:
  std::map<std::uint32_t, DisplayList> lists_;
};

}  // namespace tw::wire
