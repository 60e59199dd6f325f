#include "tilewall/raster.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tw {

void validate(const CameraState& cam) {
  if (!(cam.near_plane > 0.0f) || !(cam.near_plane < cam.far_plane)) {
    throw std::invalid_argument("camera requires 0 < near < far");
  }
  if (std::abs(norm(cam.orientation) - 1.0f) > 1e-6f) throw std::invalid_argument("camera orientation is not a unit quaternion");
  if (!(cam.fov_y > 0.0f) || !(cam.fov_y < std::numbers::pi_v<float>)) throw std::invalid_argument("camera fov_y must lie in (0, pi)");
  if (!std::isfinite(cam.focal_distance) || !is_finite(cam.center)) throw std::invalid_argument("camera has non-finite fields");
}

Vec3 eye_position(const CameraState& cam) {
  return cam.center + rotate(cam.orientation, Vec3{0.0f, 0.0f, cam.focal_distance});
}

Mat4 camera_matrix(const CameraState& cam, int viewport_w, int viewport_h) {
  // Composed in double and rounded once, so the float matrix carries no
  // accumulated product error.
  const double w = cam.orientation.w, x = cam.orientation.x, y = cam.orientation.y, z = cam.orientation.z;
  const double rot[3][3] = {{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
                            {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
                            {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}};
  const double fd = cam.focal_distance;
  const double eye[3] = {cam.center.x + rot[0][2] * fd, cam.center.y + rot[1][2] * fd, cam.center.z + rot[2][2] * fd};

  const double aspect = static_cast<double>(viewport_w) / static_cast<double>(viewport_h);
  const double fy = 1.0 / std::tan(0.5 * static_cast<double>(cam.fov_y));
  const double n = cam.near_plane;
  const double f = cam.far_plane;
  const double scale[2] = {fy / aspect, fy};

  Mat4 out;
  // Rows 0 and 1: scaled right/up axes. Row 2: depth. Row 3: -view z.
  for (int r = 0; r < 3; ++r) {
    double row[4];
    double t = 0.0;
    for (int c = 0; c < 3; ++c) {
      row[c] = rot[c][r];
      t -= rot[c][r] * eye[c];
    }
    row[3] = t;
    for (int c = 0; c < 4; ++c) {
      if (r < 2) {
        out.at(r, c) = static_cast<float>(scale[r] * row[c]);
      } else {
        out.at(2, c) = static_cast<float>(f / (n - f) * row[c] + (c == 3 ? n * f / (n - f) : 0.0));
        out.at(3, c) = static_cast<float>(-row[c]);
      }
    }
  }
  return out;
}

PixelRect PixelRect::intersect(const PixelRect& o) const {
  const int x0 = std::max(x, o.x);
  const int y0 = std::max(y, o.y);
  const int x1 = std::min(x + w, o.x + o.w);
  const int y1 = std::min(y + h, o.y + o.h);
  if (x1 <= x0 || y1 <= y0) return {x0, y0, 0, 0};
  return {x0, y0, x1 - x0, y1 - y0};
}

TileRect TileGrid::tile(int row, int col) const {
  return {{col * tile_w, row * tile_h, tile_w, tile_h}, {row, col}};
}

std::vector<TileRect> TileGrid::tiles() const {
  std::vector<TileRect> out;
  out.reserve(static_cast<std::size_t>(count()));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) out.push_back(tile(r, c));
  }
  return out;
}

Framebuffer::Framebuffer(int width, int height) : Framebuffer(PixelRect{0, 0, width, height}) {}

Framebuffer::Framebuffer(const PixelRect& area) : area_(area) {
  if (area.w <= 0 || area.h <= 0) throw std::invalid_argument("framebuffer dimensions must be positive");
  const auto n = static_cast<std::size_t>(area.w) * static_cast<std::size_t>(area.h);
  color_.assign(n, kBackground);
  depth_.assign(n, 1.0f);
}

void Framebuffer::clear(Rgba8 color, float depth) {
  std::fill(color_.begin(), color_.end(), color);
  std::fill(depth_.begin(), depth_.end(), depth);
}

std::optional<ScreenTriangle> project_triangle(const Mat4& view_proj, const Triangle& tri, int mural_w, int mural_h) {
  ScreenTriangle out;
  const float half_w = 0.5f * static_cast<float>(mural_w);
  const float half_h = 0.5f * static_cast<float>(mural_h);
  for (int i = 0; i < 3; ++i) {
    const Vec4 clip = transform(view_proj, tri[i].position);
    if (!(clip.w > 0.0f) || !(clip.z >= 0.0f) || !(clip.z <= clip.w)) return std::nullopt;
    const float inv_w = 1.0f / clip.w;
    const float sx = (clip.x * inv_w + 1.0f) * half_w;
    const float sy = (1.0f - clip.y * inv_w) * half_h;
    if (!(std::abs(sx) < kGuardBand) || !(std::abs(sy) < kGuardBand)) return std::nullopt;
    out[i] = {sx, sy, clip.z * inv_w, tri[i].color};
  }
  return out;
}

namespace {

struct Fixed {
  std::int64_t x;
  std::int64_t y;
};

// std::lround for |x| below the guard band, without the libm call.
std::int64_t round_half_away(float x) {
  auto i = static_cast<std::int64_t>(x);
  const float frac = x - static_cast<float>(i);
  if (frac >= 0.5f) ++i;
  if (frac <= -0.5f) --i;
  return i;
}

Fixed snap(const ScreenVertex& v) {
  constexpr float scale = static_cast<float>(1 << kSubpixelBits);
  return {round_half_away(v.x * scale), round_half_away(v.y * scale)};
}

// Edge function of a->b evaluated at p; positive on the interior of a
// positively wound triangle (y down).
std::int64_t edge(Fixed a, Fixed b, Fixed p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

bool is_top_left(Fixed a, Fixed b) {
  const std::int64_t dx = b.x - a.x;
  const std::int64_t dy = b.y - a.y;
  return dy < 0 || (dy == 0 && dx > 0);
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

inline std::uint8_t blend_channel(float w0, float w1, float w2, const float* chan) {
  const float v = w0 * chan[0] + w1 * chan[1] + w2 * chan[2];
  // Same result as clamp(lround(v), 0, 255) for finite v; v - trunc(v) is exact.
  const float c = std::clamp(v, 0.0f, 255.0f);
  const int t = static_cast<int>(c);
  const int i = t + (c - static_cast<float>(t) >= 0.5f ? 1 : 0);
  return static_cast<std::uint8_t>(i);
}

}  // namespace

void rasterize_triangle(Framebuffer& fb, const ScreenTriangle& tri, const PixelRect& scissor, const RankPlane* ranks) {
  if (ranks != nullptr && ranks->owner.size() != fb.color().size()) {
    throw std::invalid_argument("rank plane does not match the framebuffer");
  }
  if (!fb.area().contains(scissor)) throw std::invalid_argument("scissor must lie within the framebuffer");
  if (scissor.empty()) return;

  ScreenTriangle v = tri;
  Fixed p0 = snap(v[0]);
  Fixed p1 = snap(v[1]);
  Fixed p2 = snap(v[2]);
  std::int64_t area = edge(p0, p1, p2);
  if (area == 0) return;
  if (area < 0) {
    std::swap(v[1], v[2]);
    std::swap(p1, p2);
    area = -area;
  }

  constexpr std::int64_t one = std::int64_t{1} << kSubpixelBits;
  constexpr std::int64_t half = one / 2;
  const std::int64_t min_fx = std::min({p0.x, p1.x, p2.x});
  const std::int64_t max_fx = std::max({p0.x, p1.x, p2.x});
  const std::int64_t min_fy = std::min({p0.y, p1.y, p2.y});
  const std::int64_t max_fy = std::max({p0.y, p1.y, p2.y});

  // Pixels whose centers (px * one + half) can fall inside the bounds.
  const std::int64_t x_begin = std::max<std::int64_t>(scissor.x, floor_div(min_fx - half, one));
  const std::int64_t x_end = std::min<std::int64_t>(scissor.x + scissor.w, floor_div(max_fx - half, one) + 1);
  const std::int64_t y_begin = std::max<std::int64_t>(scissor.y, floor_div(min_fy - half, one));
  const std::int64_t y_end = std::min<std::int64_t>(scissor.y + scissor.h, floor_div(max_fy - half, one) + 1);
  if (x_begin >= x_end || y_begin >= y_end) return;

  // Weight of vertex k comes from the edge opposite to it.
  const Fixed ea[3] = {p1, p2, p0};
  const Fixed eb[3] = {p2, p0, p1};
  std::int64_t step_x[3];
  std::int64_t step_y[3];
  std::int64_t row_start[3];
  std::int64_t bias[3];
  const Fixed origin{x_begin * one + half, y_begin * one + half};
  for (int k = 0; k < 3; ++k) {
    step_x[k] = -(eb[k].y - ea[k].y) * one;
    step_y[k] = (eb[k].x - ea[k].x) * one;
    row_start[k] = edge(ea[k], eb[k], origin);
    bias[k] = is_top_left(ea[k], eb[k]) ? 0 : -1;
  }

  const float inv_area = 1.0f / static_cast<float>(area);
  // Per channel vertex values; a flat channel needs no blending.
  float chan[3][3];
  bool flat[3];
  for (int ch = 0; ch < 3; ++ch) {
    for (int k = 0; k < 3; ++k) {
      const Color& c = v[k].color;
      chan[ch][k] = static_cast<float>(ch == 0 ? c.r : ch == 1 ? c.g : c.b);
    }
    flat[ch] = chan[ch][0] == chan[ch][1] && chan[ch][1] == chan[ch][2];
  }
  const bool flat_z = v[0].z == v[1].z && v[1].z == v[2].z;
  const std::int64_t width = x_end - x_begin;
  auto shade = [&](std::size_t idx, const std::int64_t* e) {
    const float w0 = static_cast<float>(e[0]) * inv_area;
    const float w1 = static_cast<float>(e[1]) * inv_area;
    const float w2 = static_cast<float>(e[2]) * inv_area;
    const float z = flat_z ? v[0].z : std::clamp(w0 * v[0].z + w1 * v[1].z + w2 * v[2].z, 0.0f, 1.0f);
    float& depth = fb.depth()[idx];
    if (z < depth || (ranks != nullptr && z == depth && ranks->rank < ranks->owner[idx])) {
      depth = z;
      if (ranks != nullptr) ranks->owner[idx] = ranks->rank;
      fb.color()[idx] = Rgba8{flat[0] ? v[0].color.r : blend_channel(w0, w1, w2, chan[0]),
                              flat[1] ? v[0].color.g : blend_channel(w0, w1, w2, chan[1]),
                              flat[2] ? v[0].color.b : blend_channel(w0, w1, w2, chan[2]), 255};
    }
  };
  for (std::int64_t py = y_begin; py < y_end; ++py) {
    const std::size_t row = fb.index(static_cast<int>(x_begin), static_cast<int>(py));
    std::int64_t lo = 0;
    std::int64_t hi = width;
    // Solve each edge test for the covered run [lo, hi) of this row.
    for (int k = 0; k < 3; ++k) {
      const std::int64_t e0 = row_start[k] + bias[k];
      const std::int64_t sx = step_x[k];
      if (sx == 0) {
        if (e0 < 0) hi = 0;
      } else if (sx > 0) {
        if (e0 < 0) lo = std::max(lo, (-e0 + sx - 1) / sx);
      } else {
        hi = e0 < 0 ? 0 : std::min(hi, e0 / -sx + 1);
      }
    }
    std::int64_t e[3] = {row_start[0] + lo * step_x[0], row_start[1] + lo * step_x[1], row_start[2] + lo * step_x[2]};
    for (std::int64_t i = lo; i < hi; ++i) {
      shade(row + static_cast<std::size_t>(i), e);
      e[0] += step_x[0];
      e[1] += step_x[1];
      e[2] += step_x[2];
    }
    row_start[0] += step_y[0];
    row_start[1] += step_y[1];
    row_start[2] += step_y[2];
  }
}

void draw_triangles(Framebuffer& fb, const Mat4& view_proj, std::span<const Triangle> tris, int mural_w, int mural_h,
                    const PixelRect& scissor, const RankPlane* ranks) {
  for (const Triangle& t : tris) {
    if (auto screen = project_triangle(view_proj, t, mural_w, mural_h)) rasterize_triangle(fb, *screen, scissor, ranks);
  }
}

Framebuffer render_sequential(std::span<const ScenePartition> partitions, const CameraState& cam, int mural_w,
                              int mural_h) {
  Framebuffer fb(mural_w, mural_h);
  fb.clear(kBackground, 1.0f);
  const Mat4 m = camera_matrix(cam, mural_w, mural_h);
  for (const ScenePartition& part : partitions) {
    draw_triangles(fb, m, part.mesh.triangles(), mural_w, mural_h, fb.area());
  }
  return fb;
}

Bytes encode_ppm(const Framebuffer& fb) {
  const std::string header = "P6\n" + std::to_string(fb.width()) + " " + std::to_string(fb.height()) + "\n255\n";
  Bytes out(header.begin(), header.end());
  out.reserve(out.size() + fb.color().size() * 3);
  for (const Rgba8& c : fb.color()) {
    out.push_back(c.r);
    out.push_back(c.g);
    out.push_back(c.b);
  }
  return out;
}

void write_ppm(const Framebuffer& fb, const std::filesystem::path& path) {
  const Bytes data = encode_ppm(fb);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

void write_depth(const Framebuffer& fb, const std::filesystem::path& path) {
  Bytes data;
  ByteWriter w(data);
  for (float d : fb.depth()) w.f32(d);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
}

}  // namespace tw
