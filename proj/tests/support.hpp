#pragma once

// Random generators shared by the unit tests and the acceptance binary.

#include <random>
#include <vector>

#include "tilewall/interact/event.hpp"
#include "tilewall/raster.hpp"
#include "tilewall/scene.hpp"
#include "tilewall/wire/codec.hpp"

namespace tw::testing {

inline float rand_float(std::mt19937_64& rng, float lo, float hi) {
  return std::uniform_real_distribution<float>(lo, hi)(rng);
}

inline Color rand_color(std::mt19937_64& rng) {
  return {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())};
}

inline Triangle rand_triangle(std::mt19937_64& rng, float extent = 1.0f) {
  Triangle t;
  for (Vertex& v : t) {
    v.position = {rand_float(rng, -extent, extent), rand_float(rng, -extent, extent), rand_float(rng, -extent, extent)};
    v.color = rand_color(rng);
  }
  return t;
}

inline wire::DrawTriangles rand_draw(std::mt19937_64& rng, std::size_t max_tris) {
  wire::DrawTriangles d;
  const std::size_t n = rng() % (max_tris + 1);
  for (std::size_t i = 0; i < n; ++i) d.triangles.push_back(rand_triangle(rng));
  return d;
}

/// Any valid command, with every field randomized.
inline wire::Command rand_command(std::mt19937_64& rng) {
  switch (rng() % 10) {
    case 0: return wire::BeginFrame{static_cast<std::uint32_t>(rng()), static_cast<std::uint16_t>(rng())};
    case 1:
      return wire::Clear{{static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                          static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng())},
                         rand_float(rng, 0.0f, 1.0f)};
    case 2: {
      wire::SetCamera s;
      for (float& f : s.matrix.m) f = rand_float(rng, -100.0f, 100.0f);
      return s;
    }
    case 3: return rand_draw(rng, 5);
    case 4: {
      wire::DefineList l;
      l.id = static_cast<std::uint32_t>(rng());
      const std::size_t n = rng() % 4;
      for (std::size_t i = 0; i < n; ++i) l.draws.push_back(rand_draw(rng, 3));
      return l;
    }
    case 5: return wire::CallList{static_cast<std::uint32_t>(rng())};
    case 6: return wire::Barrier{static_cast<std::uint32_t>(rng())};
    case 7: return wire::Swap{rng() % 2 == 0};
    case 8: {
      wire::BlitImage b;
      b.x = static_cast<std::uint16_t>(rng());
      b.y = static_cast<std::uint16_t>(rng());
      b.w = static_cast<std::uint16_t>(rng() % 6);
      b.h = static_cast<std::uint16_t>(rng() % 6);
      b.pixels.resize(static_cast<std::size_t>(b.w) * b.h);
      for (Rgba8& p : b.pixels) {
        p = {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
             static_cast<std::uint8_t>(rng())};
      }
      return b;
    }
    default: return wire::EndFrame{static_cast<std::uint32_t>(rng())};
  }
}

/// Any valid event: only the fields of its kind are set.
inline interact::EventMsg rand_event(std::mt19937_64& rng) {
  using namespace interact;
  EventMsg e;
  switch (rng() % 8) {
    case 0: e = pointer_down(static_cast<std::uint8_t>(rng() % 3), rand_float(rng, -1, 1), rand_float(rng, -1, 1)); break;
    case 1: e = pointer_move(static_cast<std::uint8_t>(rng() % 3), rand_float(rng, -1, 1), rand_float(rng, -1, 1)); break;
    case 2: e = pointer_up(static_cast<std::uint8_t>(rng() % 3)); break;
    case 3: e = wheel(rand_float(rng, -5, 5)); break;
    case 4: e = key(static_cast<std::uint32_t>(rng()), rng() % 2 == 0); break;
    case 5: e = set_mode(static_cast<std::uint8_t>(rng() % 2)); break;
    case 6: e = toggle_cache(); break;
    default: e = quit(); break;
  }
  e.seq = static_cast<std::uint32_t>(rng());
  return e;
}

/// Cameras looking at the origin from random directions.
inline std::vector<CameraState> random_cameras(std::mt19937_64& rng, int n) {
  std::vector<CameraState> out;
  for (int i = 0; i < n; ++i) {
    CameraState c;
    std::normal_distribution<float> g;
    c.orientation = normalize(Quat{g(rng), g(rng), g(rng), g(rng)});
    c.focal_distance = 3.0f + rand_float(rng, -0.5f, 1.0f);
    out.push_back(c);
  }
  return out;
}

}  // namespace tw::testing

// ---- cluster helpers ----------------------------------------------------------

#include <functional>
#include <memory>

#include "tilewall/cluster/app_node.hpp"
#include "tilewall/cluster/tile_server.hpp"
#include "tilewall/wire/transport.hpp"

namespace tw::testing {

/// Sink that keeps every byte it is sent.
class RecordingSink : public wire::ByteSink {
 public:
  void send(ByteView bytes) override {
    if (closed) throw wire::ChannelClosed("recording sink closed");
    data.insert(data.end(), bytes.begin(), bytes.end());
  }
  void close() override { closed = true; }

  Bytes data;
  bool closed = false;
};

inline std::vector<wire::Command> decode_all(ByteView bytes) {
  wire::StreamDecoder dec;
  dec.feed(bytes);
  std::vector<wire::Command> out;
  while (auto c = dec.next()) out.push_back(std::move(*c));
  if (dec.buffered() != 0) throw std::runtime_error("trailing bytes in command stream");
  return out;
}

/// Command streams of every app node: streams[rank][server], for the frames
/// rendered with `cameras` (one frame each).
struct RecordedJob {
  std::vector<std::vector<std::vector<wire::Command>>> streams;
  std::vector<std::vector<cluster::FrameTraffic>> traffic;  // [rank][frame]
};

inline RecordedJob record_app_nodes(cluster::DisplayMode mode, const TileGrid& grid,
                                    const std::vector<ScenePartition>& parts, const std::vector<CameraState>& cameras,
                                    bool caching, std::size_t bucket_batch = 64) {
  RecordedJob out;
  const auto n = static_cast<std::uint32_t>(parts.size());
  for (std::uint32_t r = 0; r < n; ++r) {
    std::vector<RecordingSink> sinks(static_cast<std::size_t>(grid.count()));
    std::vector<wire::ByteSink*> ptrs;
    for (auto& s : sinks) ptrs.push_back(&s);
    cluster::AppNodeConfig cfg{r, n, mode, grid, bucket_batch, 4096, 0.0};
    cluster::AppNode node(cfg, std::make_shared<const ScenePartition>(parts[r]), ptrs);
    std::vector<cluster::FrameTraffic> t;
    for (const CameraState& cam : cameras) t.push_back(node.render_frame(cam, caching));
    std::vector<std::vector<wire::Command>> per_server;
    for (auto& s : sinks) per_server.push_back(decode_all(s.data));
    out.streams.push_back(std::move(per_server));
    out.traffic.push_back(std::move(t));
  }
  return out;
}

/// Feeds per-sender streams to a server in a random interleaving that keeps
/// each sender's order. Protocol errors propagate.
inline void feed_interleaved(cluster::TileServer& server, std::vector<std::vector<wire::Command>> streams,
                             std::mt19937_64& rng) {
  std::vector<std::size_t> next(streams.size(), 0);
  std::size_t left = 0;
  for (const auto& s : streams) left += s.size();
  for (; left > 0; --left) {
    std::uint32_t r;
    do r = static_cast<std::uint32_t>(rng() % streams.size());
    while (next[r] == streams[r].size());
    server.on_command(r, streams[r][next[r]++]);
  }
}

/// Presents of one server for a recorded job fed in a random interleaving.
inline std::vector<Framebuffer> serve(const RecordedJob& job, cluster::DisplayMode mode, const TileGrid& grid,
                                      std::size_t server, std::mt19937_64& rng, bool record_log = false,
                                      std::vector<cluster::ServerLogEntry>* log = nullptr) {
  cluster::TileServerConfig cfg;
  cfg.viewport = cluster::server_viewports(mode, grid)[server];
  cfg.mural_w = grid.mural_w();
  cfg.mural_h = grid.mural_h();
  cfg.n_senders = static_cast<std::uint32_t>(job.streams.size());
  cfg.record_log = record_log;
  std::vector<Framebuffer> frames;
  cluster::TileServer ts(cfg, [&](const cluster::PresentedFrame& f) { frames.push_back(f.image); });
  std::vector<std::vector<wire::Command>> streams;
  for (const auto& rank : job.streams) streams.push_back(rank[server]);
  feed_interleaved(ts, streams, rng);
  if (log != nullptr) *log = ts.log();
  return frames;
}

}  // namespace tw::testing

// ---- volume oracle ------------------------------------------------------------

#include <cmath>

namespace tw::testing {

/// Brute-force MIP: every sample t = k * step from the eye out to past the far
/// side of the cube, camera basis from the rotation matrix of the orientation.
inline std::vector<std::uint8_t> brute_force_mip(const VolumeGrid& vol, const CameraState& cam, const PixelRect& region,
                                                 int mural_w, int mural_h, double step) {
  const double w = cam.orientation.w, x = cam.orientation.x, y = cam.orientation.y, z = cam.orientation.z;
  // Columns of the rotation matrix are the camera's right, up and back axes.
  const double rot[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                            {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                            {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
  const double center[3] = {cam.center.x, cam.center.y, cam.center.z};
  double eye[3];
  for (int i = 0; i < 3; ++i) eye[i] = center[i] + rot[i][2] * cam.focal_distance;
  const double th = std::tan(static_cast<double>(cam.fov_y) / 2.0);
  const double far_t = std::sqrt(eye[0] * eye[0] + eye[1] * eye[1] + eye[2] * eye[2]) + 1.0;
  const auto last = static_cast<long long>(far_t / step) + 1;

  std::vector<std::uint8_t> out;
  for (int py = region.y; py < region.y + region.h; ++py) {
    for (int px = region.x; px < region.x + region.w; ++px) {
      const double sx = (2.0 * (px + 0.5) / mural_w - 1.0) * (static_cast<double>(mural_w) / mural_h) * th;
      const double sy = (1.0 - 2.0 * (py + 0.5) / mural_h) * th;
      double d[3];
      for (int i = 0; i < 3; ++i) d[i] = rot[i][0] * sx + rot[i][1] * sy - rot[i][2];
      const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
      std::uint8_t best = 0;
      for (long long k = 0; k <= last; ++k) {
        const double t = static_cast<double>(k) * step;
        double p[3];
        for (int i = 0; i < 3; ++i) p[i] = eye[i] + d[i] / n * t;
        if (std::abs(p[0]) > 0.5 || std::abs(p[1]) > 0.5 || std::abs(p[2]) > 0.5) continue;
        std::uint32_t idx[3];
        for (int i = 0; i < 3; ++i) {
          idx[i] = static_cast<std::uint32_t>(std::min(std::floor((p[i] + 0.5) * vol.dims[i]), vol.dims[i] - 1.0));
        }
        best = std::max(best, vol.at(idx[0], idx[1], idx[2]));
      }
      out.push_back(best);
    }
  }
  return out;
}

}  // namespace tw::testing
