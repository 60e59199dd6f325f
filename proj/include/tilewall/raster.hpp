#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "tilewall/math.hpp"
#include "tilewall/scene.hpp"

namespace tw {

/// Examiner-style camera: the eye sits at center + orientation * (0, 0, focal_distance)
/// and looks at center.
struct CameraState {
  Quat orientation;
  float focal_distance = 3.5f;
  Vec3 center;
  float fov_y = 0.8f;
  float near_plane = 0.5f;
  float far_plane = 10.0f;

  friend bool operator==(const CameraState&, const CameraState&) = default;
};

/// Throws std::invalid_argument when an invariant is violated.
void validate(const CameraState& cam);
Vec3 eye_position(const CameraState& cam);

/// World -> clip. After the perspective divide, x/y in [-1, 1] map to the
/// viewport and z lands in [0, 1] between the near and far planes.
Mat4 camera_matrix(const CameraState& cam, int viewport_w, int viewport_h);

struct Rgba8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  std::uint8_t a = 255;

  friend bool operator==(const Rgba8&, const Rgba8&) = default;
};

inline constexpr Rgba8 kBackground{0, 0, 0, 255};

/// Pixel rectangle in mural coordinates.
struct PixelRect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(const PixelRect& o) const {
    return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
  }
  PixelRect intersect(const PixelRect& o) const;

  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct TileId {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const TileId&, const TileId&) = default;
};

struct TileRect {
  PixelRect rect;
  TileId id;
};

/// Uniform rows x cols grid of equally sized tiles forming the mural.
struct TileGrid {
  int rows = 2;
  int cols = 2;
  int tile_w = 256;
  int tile_h = 256;

  int mural_w() const { return cols * tile_w; }
  int mural_h() const { return rows * tile_h; }
  PixelRect mural() const { return {0, 0, mural_w(), mural_h()}; }
  int count() const { return rows * cols; }
  TileRect tile(int row, int col) const;
  TileRect tile(int index) const { return tile(index / cols, index % cols); }
  int index(TileId id) const { return id.row * cols + id.col; }
  std::vector<TileRect> tiles() const;
};

/// Color + depth raster covering `area` of the mural.
class Framebuffer {
 public:
  Framebuffer() = default;
  Framebuffer(int width, int height);
  explicit Framebuffer(const PixelRect& area);

  void clear(Rgba8 color, float depth);

  const PixelRect& area() const { return area_; }
  int width() const { return area_.w; }
  int height() const { return area_.h; }

  std::size_t index(int mural_x, int mural_y) const {
    return static_cast<std::size_t>(mural_y - area_.y) * static_cast<std::size_t>(area_.w) +
           static_cast<std::size_t>(mural_x - area_.x);
  }
  Rgba8 color_at(int x, int y) const { return color_[index(x, y)]; }
  float depth_at(int x, int y) const { return depth_[index(x, y)]; }
  void set(int x, int y, Rgba8 c, float d) {
    const std::size_t i = index(x, y);
    color_[i] = c;
    depth_[i] = d;
  }

  std::span<Rgba8> color() { return color_; }
  std::span<const Rgba8> color() const { return color_; }
  std::span<float> depth() { return depth_; }
  std::span<const float> depth() const { return depth_; }

  /// Same area and identical color + depth bytes.
  friend bool operator==(const Framebuffer&, const Framebuffer&) = default;

 private:
  PixelRect area_;
  std::vector<Rgba8> color_;
  std::vector<float> depth_;
};

/// Pixel-space vertex: x, y in mural pixels (y down), z is depth in [0, 1].
struct ScreenVertex {
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  Color color;
};

using ScreenTriangle = std::array<ScreenVertex, 3>;

/// Vertices beyond this distance from the mural origin cull the triangle.
inline constexpr float kGuardBand = 32768.0f;
/// Vertex positions snap to 1/256 pixel before coverage is evaluated.
inline constexpr int kSubpixelBits = 8;

/// Projects a world triangle. Triangles with any vertex outside the near/far
/// range, behind the eye, or outside the guard band are culled (no clipping).
std::optional<ScreenTriangle> project_triangle(const Mat4& view_proj, const Triangle& tri, int mural_w, int mural_h);

/// Owner rank per pixel of a framebuffer shared by several senders. With a
/// plane, a fragment from `rank` wins when (z, rank) < (depth, owner), which
/// gives the same pixels as one layer per sender merged by composite order
/// (nearest, ties to the lowest rank), whatever the interleaving.
struct RankPlane {
  std::span<std::uint32_t> owner;
  std::uint32_t rank = 0;
};

/// Fills pixels whose centers are covered under the top-left rule, inside
/// `scissor`, and strictly nearer than the stored depth (or, with `ranks`,
/// lexicographically smaller in (depth, rank)).
void rasterize_triangle(Framebuffer& fb, const ScreenTriangle& tri, const PixelRect& scissor,
                        const RankPlane* ranks = nullptr);

/// project_triangle + rasterize_triangle for a batch.
void draw_triangles(Framebuffer& fb, const Mat4& view_proj, std::span<const Triangle> tris, int mural_w, int mural_h,
                    const PixelRect& scissor, const RankPlane* ranks = nullptr);

Framebuffer render_sequential(std::span<const ScenePartition> partitions, const CameraState& cam, int mural_w,
                              int mural_h);

/// Binary P6 (alpha dropped).
void write_ppm(const Framebuffer& fb, const std::filesystem::path& path);
Bytes encode_ppm(const Framebuffer& fb);
/// Raw little-endian float32 depth plane, row-major.
void write_depth(const Framebuffer& fb, const std::filesystem::path& path);

}  // namespace tw
