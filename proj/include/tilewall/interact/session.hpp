#pragma once

#include <array>
#include <optional>
#include <vector>

#include "tilewall/cluster/frame.hpp"
#include "tilewall/interact/event.hpp"
#include "tilewall/math.hpp"
#include "tilewall/raster.hpp"

namespace tw::interact {

/// Virtual sphere radius, as a fraction of the viewport half-extent.
inline constexpr float kTrackballRadius = 0.8f;
/// WHEEL scales the focal distance by exp(-kWheelFactor * delta).
inline constexpr float kWheelFactor = 0.1f;
inline constexpr float kMinFocal = 0.01f;
inline constexpr float kMaxFocal = 1.0e4f;
/// KEY down with this code restores the initial camera.
inline constexpr std::uint32_t kKeyReset = 'r';

/// Point on the virtual sphere (or its hyperbolic sheet) above p.
Vec3 trackball_lift(float x, float y, float radius);

/// Rotation carrying lift(p0) onto lift(p1). Identity when the lifts coincide.
Quat trackball(float x0, float y0, float x1, float y1, float radius);

struct ApplyResult {
  bool camera_changed = false;
  bool flags_changed = false;
  bool quit = false;

  bool redraw() const { return camera_changed || flags_changed; }
};

/// Camera and view flags driven only by the event stream. Two sessions fed
/// the same events from the same initial state stay bit-identical.
class InteractionSession {
 public:
  explicit InteractionSession(CameraState initial = {}, cluster::DisplayMode mode = cluster::DisplayMode::tiled,
                              bool caching = false);

  /// Throws ProtocolError unless e.seq is greater than every seq applied so far.
  ApplyResult apply(const EventMsg& e);

  const CameraState& camera() const { return camera_; }
  const CameraState& initial_camera() const { return initial_; }
  cluster::DisplayMode mode() const { return mode_; }
  bool caching() const { return caching_; }
  bool quit_requested() const { return quit_; }
  const std::vector<EventMsg>& log() const { return log_; }
  std::optional<std::uint32_t> last_seq() const { return last_seq_; }

  /// Keep applied events in log(). On by default.
  void set_logging(bool on) { logging_ = on; }

 private:
  CameraState initial_;
  CameraState camera_;
  cluster::DisplayMode mode_;
  bool caching_;
  bool quit_ = false;
  std::optional<std::array<float, 2>> anchor_;
  std::optional<std::uint32_t> last_seq_;
  std::vector<EventMsg> log_;
  bool logging_ = true;
};

inline ApplyResult apply_event(InteractionSession& session, const EventMsg& e) { return session.apply(e); }

}  // namespace tw::interact
