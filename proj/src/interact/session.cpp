#include "tilewall/interact/session.hpp"

#include <algorithm>
#include <cmath>

namespace tw::interact {

Vec3 trackball_lift(float x, float y, float radius) {
  const float d2 = x * x + y * y;
  const float d = std::sqrt(d2);
  const float r2 = radius * radius;
  float z;
  if (d < radius * 0.70710678f) {
    z = std::sqrt(std::max(0.0f, r2 - d2));
  } else {
    z = r2 / (2.0f * d);
  }
  return {x, y, z};
}

Quat trackball(float x0, float y0, float x1, float y1, float radius) {
  if (x0 == x1 && y0 == y1) return Quat::identity();
  const Vec3 a = trackball_lift(x0, y0, radius);
  const Vec3 b = trackball_lift(x1, y1, radius);
  const Vec3 axis = cross(a, b);
  const float s = length(axis);
  if (!(s > 0.0f)) return Quat::identity();
  const float angle = std::atan2(s, dot(a, b));
  const float h = 0.5f * angle;
  const float k = std::sin(h) / s;
  return normalize(Quat{std::cos(h), axis.x * k, axis.y * k, axis.z * k});
}

InteractionSession::InteractionSession(CameraState initial, cluster::DisplayMode mode, bool caching)
    : initial_(initial), camera_(initial), mode_(mode), caching_(caching) {
  validate(initial_);
}

ApplyResult InteractionSession::apply(const EventMsg& e) {
  if (last_seq_ && e.seq <= *last_seq_) {
    throw ProtocolError("event seq " + std::to_string(e.seq) + " after " + std::to_string(*last_seq_));
  }
  last_seq_ = e.seq;
  if (logging_) log_.push_back(e);

  const CameraState before = camera_;
  ApplyResult r;
  switch (e.kind) {
    case EventKind::pointer_down: anchor_ = {e.x, e.y}; break;
    case EventKind::pointer_move: {
      if (!anchor_) break;
      const auto [ax, ay] = *anchor_;
      if (e.button == kButtonRotate) {
        const Quat q = trackball(ax, ay, e.x, e.y, kTrackballRadius);
        camera_.orientation = normalize(camera_.orientation * conjugate(q));
      } else if (e.button == kButtonPan) {
        const float scale = camera_.focal_distance * std::tan(camera_.fov_y * 0.5f);
        const Vec3 shift = rotate(camera_.orientation, Vec3{(e.x - ax) * scale, (e.y - ay) * scale, 0.0f});
        camera_.center = camera_.center - shift;
      } else if (e.button == kButtonZoom) {
        camera_.focal_distance = std::clamp(camera_.focal_distance * std::exp(-(e.y - ay)), kMinFocal, kMaxFocal);
      }
      anchor_ = {e.x, e.y};
      break;
    }
    case EventKind::pointer_up: anchor_.reset(); break;
    case EventKind::wheel:
      camera_.focal_distance =
          std::clamp(camera_.focal_distance * std::exp(-kWheelFactor * e.delta), kMinFocal, kMaxFocal);
      break;
    case EventKind::key:
      if (e.key_down && e.key_code == kKeyReset) camera_ = initial_;
      break;
    case EventKind::set_mode: {
      const auto m = static_cast<cluster::DisplayMode>(e.mode);
      r.flags_changed = m != mode_;
      mode_ = m;
      break;
    }
    case EventKind::toggle_cache:
      caching_ = !caching_;
      r.flags_changed = true;
      break;
    case EventKind::quit:
      quit_ = true;
      r.quit = true;
      break;
  }
  r.camera_changed = !(camera_ == before);
  return r;
}

}  // namespace tw::interact
