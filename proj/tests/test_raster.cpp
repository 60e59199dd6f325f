#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "tilewall/cluster/composite.hpp"
#include "tilewall/raster.hpp"

using namespace tw;

namespace {

// ---- independent double-precision camera -----------------------------------

struct DMat3 {
  double m[3][3];
};

DMat3 rotation_matrix(Quat q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

struct DScreen {
  double x, y, z;
};

DScreen reference_project(const CameraState& cam, Vec3 p, int w, int h) {
  const DMat3 r = rotation_matrix(cam.orientation);
  const double eye[3] = {cam.center.x + r.m[0][2] * cam.focal_distance, cam.center.y + r.m[1][2] * cam.focal_distance,
                         cam.center.z + r.m[2][2] * cam.focal_distance};
  const double d[3] = {p.x - eye[0], p.y - eye[1], p.z - eye[2]};
  double v[3];
  for (int i = 0; i < 3; ++i) v[i] = r.m[0][i] * d[0] + r.m[1][i] * d[1] + r.m[2][i] * d[2];
  const double fy = 1.0 / std::tan(0.5 * static_cast<double>(cam.fov_y));
  const double aspect = static_cast<double>(w) / h;
  const double depth_dist = -v[2];
  const double xn = fy / aspect * v[0] / depth_dist;
  const double yn = fy * v[1] / depth_dist;
  const double n = cam.near_plane, f = cam.far_plane;
  const double zn = (f / (n - f) * v[2] + n * f / (n - f)) / depth_dist;
  return {(xn + 1.0) * 0.5 * w, (1.0 - yn) * 0.5 * h, zn};
}

Quat random_unit_quat(std::mt19937& rng) {
  std::normal_distribution<float> g;
  return normalize(Quat{g(rng), g(rng), g(rng), g(rng)});
}

// ---- brute-force coverage ----------------------------------------------------

struct IPt {
  long long x, y;
};

IPt snap256(float x, float y) { return {std::llround(x * 256.0f), std::llround(y * 256.0f)}; }

long long orient(IPt a, IPt b, IPt p) { return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x); }

// Pixel (px, py) is covered when its center is strictly inside every edge of
// the positively oriented triangle, or on an edge that is top or left.
bool covers(const ScreenTriangle& t, int px, int py) {
  IPt a = snap256(t[0].x, t[0].y);
  IPt b = snap256(t[1].x, t[1].y);
  IPt c = snap256(t[2].x, t[2].y);
  const long long area = orient(a, b, c);
  if (area == 0) return false;
  if (area < 0) std::swap(b, c);
  const IPt p{px * 256LL + 128, py * 256LL + 128};
  const IPt es[3][2] = {{a, b}, {b, c}, {c, a}};
  for (const auto& e : es) {
    const long long v = orient(e[0], e[1], p);
    if (v > 0) continue;
    if (v < 0) return false;
    const long long dx = e[1].x - e[0].x;
    const long long dy = e[1].y - e[0].y;
    const bool top_left = dy < 0 || (dy == 0 && dx > 0);
    if (!top_left) return false;
  }
  return true;
}

ScreenTriangle random_screen_triangle(std::mt19937& rng, float lo, float hi, float z) {
  std::uniform_real_distribution<float> c(lo, hi);
  std::uniform_int_distribution<int> col(0, 255);
  ScreenTriangle t;
  for (auto& v : t) {
    v.x = c(rng);
    v.y = c(rng);
    v.z = z;
    v.color = {static_cast<std::uint8_t>(col(rng)), static_cast<std::uint8_t>(col(rng)),
               static_cast<std::uint8_t>(col(rng))};
  }
  return t;
}

ScreenTriangle flat_triangle(ScreenTriangle t, Color c, float z) {
  for (auto& v : t) {
    v.color = c;
    v.z = z;
  }
  return t;
}

Color id_color(int i) {
  return {static_cast<std::uint8_t>(1 + i % 251), static_cast<std::uint8_t>(i / 251 + 1), static_cast<std::uint8_t>(7)};
}

Rgba8 rgba(Color c) { return {c.r, c.g, c.b, 255}; }

}  // namespace

TEST_CASE("camera validation") {
  CameraState cam;
  CHECK_NOTHROW(validate(cam));
  CameraState bad = cam;
  bad.near_plane = 0.0f;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cam;
  bad.far_plane = bad.near_plane;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cam;
  bad.orientation = Quat{1.0f, 0.1f, 0.0f, 0.0f};
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
  bad = cam;
  bad.fov_y = 3.2f;
  CHECK_THROWS_AS(validate(bad), std::invalid_argument);
}

TEST_CASE("camera matrix landmarks") {
  CameraState cam;
  const Mat4 m = camera_matrix(cam, 512, 512);
  const Triangle on_axis{Vertex{{0, 0, 0}, {}}, Vertex{{0, 0, 0}, {}}, Vertex{{0, 0, 0}, {}}};
  auto s = project_triangle(m, on_axis, 512, 512);
  REQUIRE(s);
  CHECK((*s)[0].x == doctest::Approx(256.0f).epsilon(1e-6));
  CHECK((*s)[0].y == doctest::Approx(256.0f).epsilon(1e-6));
  CHECK((*s)[0].z > 0.0f);
  CHECK((*s)[0].z < 1.0f);

  const float zn = cam.focal_distance - cam.near_plane;
  const float zf = cam.focal_distance - cam.far_plane;
  const Vec4 near_clip = transform(m, Vec3{0, 0, zn});
  const Vec4 far_clip = transform(m, Vec3{0, 0, zf});
  CHECK(std::abs(near_clip.z / near_clip.w) < 1e-6f);
  CHECK(std::abs(far_clip.z / far_clip.w - 1.0f) < 1e-6f);
}

TEST_CASE("projection matches a double-precision reference") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    CameraState cam;
    cam.orientation = random_unit_quat(rng);
    cam.center = {u(rng) * 0.5f, u(rng) * 0.5f, u(rng) * 0.5f};
    cam.focal_distance = 3.0f + u(rng);
    const Vec3 p{u(rng), u(rng), u(rng)};
    const Mat4 m = camera_matrix(cam, 512, 384);
    auto s = project_triangle(m, {Vertex{p, {}}, Vertex{p, {}}, Vertex{p, {}}}, 512, 384);
    if (!s) continue;
    const DScreen ref = reference_project(cam, p, 512, 384);
    worst = std::max({worst, std::abs((*s)[0].x - ref.x), std::abs((*s)[0].y - ref.y)});
    CHECK(std::abs((*s)[0].z - ref.z) < 1e-5);
    ++checked;
  }
  CHECK(checked > 1500);
  MESSAGE("worst pixel error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("projection culls behind the near plane") {
  CameraState cam;
  const Mat4 m = camera_matrix(cam, 64, 64);
  const Vec3 behind{0, 0, cam.focal_distance + 1.0f};
  CHECK_FALSE(project_triangle(m, {Vertex{behind, {}}, Vertex{{0, 0, 0}, {}}, Vertex{{0.1f, 0, 0}, {}}}, 64, 64));
  const Vec3 too_far{0, 0, cam.focal_distance - cam.far_plane - 1.0f};
  CHECK_FALSE(project_triangle(m, {Vertex{too_far, {}}, Vertex{{0, 0, 0}, {}}, Vertex{{0.1f, 0, 0}, {}}}, 64, 64));
}

TEST_CASE("zero-area triangle leaves the framebuffer unchanged") {
  Framebuffer fb(32, 32);
  const Framebuffer before = fb;
  ScreenTriangle t{ScreenVertex{1, 1, 0.5f, {255, 0, 0}}, ScreenVertex{10, 10, 0.5f, {255, 0, 0}},
                   ScreenVertex{20, 20, 0.5f, {255, 0, 0}}};
  rasterize_triangle(fb, t, fb.area());
  CHECK(fb == before);
}

TEST_CASE("coverage equals the brute-force oracle") {
  std::mt19937 rng(11);
  std::uniform_int_distribution<int> pos(0, 40);
  for (int trial = 0; trial < 600; ++trial) {
    Framebuffer fb(PixelRect{-4, 3, 72, 60});
    // Vertices on exact pixel centers, half-pixels and edges hit the tie cases.
    ScreenTriangle t = random_screen_triangle(rng, -10.0f, 80.0f, 0.25f);
    if (trial % 3 == 0) {
      for (auto& v : t) {
        v.x = static_cast<float>(pos(rng)) * 0.5f;
        v.y = static_cast<float>(pos(rng)) * 0.5f;
      }
    }
    PixelRect sc{-4 + pos(rng) / 4, 3 + pos(rng) / 4, 0, 0};
    sc.w = std::min(10 + pos(rng), -4 + 72 - sc.x);
    sc.h = std::min(10 + pos(rng), 3 + 60 - sc.y);
    rasterize_triangle(fb, t, sc);
    for (int y = fb.area().y; y < fb.area().y + fb.area().h; ++y) {
      for (int x = fb.area().x; x < fb.area().x + fb.area().w; ++x) {
        const bool in_scissor = x >= sc.x && x < sc.x + sc.w && y >= sc.y && y < sc.y + sc.h;
        const bool expected = in_scissor && covers(t, x, y);
        const bool written = fb.depth_at(x, y) != 1.0f;
        if (written != expected) {
          FAIL_CHECK("trial " << trial << " pixel (" << x << ", " << y << ") written=" << written);
        }
      }
    }
  }
}

TEST_CASE("abutting triangles write shared edges exactly once") {
  // Jittered grid of quads, each split into two triangles, covering more than the framebuffer.
  std::mt19937 rng(23);
  std::uniform_real_distribution<float> jitter(-3.0f, 3.0f);
  const int n = 9;
  const float cell = 10.0f;
  std::vector<std::vector<std::pair<float, float>>> grid(n + 1, std::vector<std::pair<float, float>>(n + 1));
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; j <= n; ++j) {
      const bool border = i == 0 || j == 0 || i == n || j == n;
      grid[i][j] = {-15.0f + cell * static_cast<float>(j) + (border ? 0.0f : jitter(rng)),
                    -15.0f + cell * static_cast<float>(i) + (border ? 0.0f : jitter(rng))};
    }
  }
  // Also snap some vertices to pixel centers so edges pass exactly through centers.
  grid[3][3] = {15.5f, 15.5f};
  grid[3][4] = {25.5f, 15.5f};
  grid[4][3] = {15.5f, 25.5f};
  std::vector<int> count(60 * 60, 0);
  auto sv = [&](int i, int j) { return ScreenVertex{grid[i][j].first, grid[i][j].second, 0.5f, {1, 1, 1}}; };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const ScreenTriangle tris[2] = {{sv(i, j), sv(i, j + 1), sv(i + 1, j + 1)}, {sv(i, j), sv(i + 1, j + 1), sv(i + 1, j)}};
      for (const auto& t : tris) {
        Framebuffer fb(60, 60);
        rasterize_triangle(fb, t, fb.area());
        for (std::size_t k = 0; k < count.size(); ++k) count[k] += fb.depth()[k] != 1.0f ? 1 : 0;
      }
    }
  }
  CHECK(std::all_of(count.begin(), count.end(), [](int c) { return c == 1; }));
}

TEST_CASE("scissor confinement") {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    Framebuffer fb(50, 50);
    const PixelRect sc{static_cast<int>(rng() % 20), static_cast<int>(rng() % 20), 1 + static_cast<int>(rng() % 30),
                       1 + static_cast<int>(rng() % 30)};
    rasterize_triangle(fb, random_screen_triangle(rng, -20.0f, 70.0f, 0.1f), sc);
    for (int y = 0; y < 50; ++y) {
      for (int x = 0; x < 50; ++x) {
        if (x < sc.x || y < sc.y || x >= sc.x + sc.w || y >= sc.y + sc.h) REQUIRE(fb.depth_at(x, y) == 1.0f);
      }
    }
  }
  Framebuffer small(PixelRect{10, 10, 5, 5});
  CHECK_THROWS_AS(rasterize_triangle(small, random_screen_triangle(rng, 0, 5, 0.1f), PixelRect{0, 0, 5, 5}),
                  std::invalid_argument);
}

TEST_CASE("nearest fragment wins, first writer on ties") {
  std::mt19937 rng(31);
  std::uniform_int_distribution<int> zq(1, 6);
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<ScreenTriangle> tris;
    for (int i = 0; i < 25; ++i) {
      // Few distinct depths so ties are common.
      tris.push_back(flat_triangle(random_screen_triangle(rng, -5.0f, 45.0f, 0), id_color(i),
                                   static_cast<float>(zq(rng)) / 8.0f));
    }
    Framebuffer fb(40, 40);
    for (const auto& t : tris) rasterize_triangle(fb, t, fb.area());
    for (int y = 0; y < 40; ++y) {
      for (int x = 0; x < 40; ++x) {
        Rgba8 want = kBackground;
        float best = 1.0f;
        for (std::size_t i = 0; i < tris.size(); ++i) {
          if (covers(tris[i], x, y) && tris[i][0].z < best) {
            best = tris[i][0].z;
            want = rgba(tris[i][0].color);
          }
        }
        REQUIRE(fb.color_at(x, y) == want);
        REQUIRE(fb.depth_at(x, y) == best);
      }
    }
  }
}

TEST_CASE("distinct depths make draw order irrelevant") {
  std::mt19937 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<ScreenTriangle> tris;
    for (int i = 0; i < 60; ++i) {
      ScreenTriangle t = random_screen_triangle(rng, -10.0f, 74.0f, 0);
      const float base = static_cast<float>(i + 1) / 64.0f;
      t[0].z = base;
      t[1].z = base + 0.001f;
      t[2].z = base + 0.002f;
      tris.push_back(t);
    }
    Framebuffer a(64, 64);
    for (const auto& t : tris) rasterize_triangle(a, t, a.area());
    std::shuffle(tris.begin(), tris.end(), rng);
    Framebuffer b(64, 64);
    for (const auto& t : tris) rasterize_triangle(b, t, b.area());
    CHECK(a == b);
  }
}

TEST_CASE("rank plane equals per-rank layers merged by depth") {
  std::mt19937 rng(53);
  std::uniform_int_distribution<int> zq(1, 5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::uint32_t ranks = 1 + rng() % 4;
    std::vector<std::vector<ScreenTriangle>> per_rank(ranks);
    for (auto& list : per_rank) {
      for (int i = 0; i < 15; ++i) {
        ScreenTriangle t = random_screen_triangle(rng, -5.0f, 37.0f, static_cast<float>(zq(rng)) / 8.0f);
        if (i % 2 == 0) t = flat_triangle(t, id_color(static_cast<int>(rng() % 1000)), t[0].z);
        list.push_back(t);
      }
    }
    std::vector<Framebuffer> layers(ranks, Framebuffer(32, 32));
    std::vector<cluster::RankedFrame> ranked;
    for (std::uint32_t r = 0; r < ranks; ++r) {
      for (const auto& t : per_rank[r]) rasterize_triangle(layers[r], t, layers[r].area());
      ranked.push_back({r, &layers[r]});
    }
    const Framebuffer merged = cluster::composite_depth(ranked);

    // Shared buffer, random interleaving of the per-rank streams.
    Framebuffer shared(32, 32);
    std::vector<std::uint32_t> owner(32 * 32, 0);
    std::vector<std::size_t> next(ranks, 0);
    for (std::size_t left = ranks * 15; left > 0; --left) {
      std::uint32_t r;
      do r = static_cast<std::uint32_t>(rng() % ranks);
      while (next[r] == per_rank[r].size());
      const RankPlane plane{owner, r};
      rasterize_triangle(shared, per_rank[r][next[r]++], shared.area(), &plane);
    }
    CHECK(shared == merged);
  }
}

TEST_CASE("barycentric color interpolation") {
  Framebuffer fb(16, 16);
  ScreenTriangle t{ScreenVertex{0, 0, 0.5f, {255, 0, 0}}, ScreenVertex{16, 0, 0.5f, {0, 255, 0}},
                   ScreenVertex{0, 16, 0.5f, {0, 0, 255}}};
  rasterize_triangle(fb, t, fb.area());
  // Pixel (0, 0) center is at (0.5, 0.5): weights (15/16, 1/32, 1/32).
  const Rgba8 c = fb.color_at(0, 0);
  CHECK(c.r == 239);
  CHECK(c.g == 8);
  CHECK(c.b == 8);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x + y < 15; ++x) {
      const Rgba8 p = fb.color_at(x, y);
      CHECK(std::abs(p.r + p.g + p.b - 255) <= 2);
    }
  }
}

TEST_CASE("render_sequential") {
  const Framebuffer empty = render_sequential({}, CameraState{}, 20, 10);
  CHECK(std::all_of(empty.color().begin(), empty.color().end(), [](Rgba8 c) { return c == kBackground; }));
  CHECK(std::all_of(empty.depth().begin(), empty.depth().end(), [](float d) { return d == 1.0f; }));

  // One triangle at known coordinates against the coverage oracle.
  CameraState cam;
  Mesh m;
  m.add({Vertex{{-0.5f, -0.4f, 0}, {200, 10, 10}}, Vertex{{0.6f, -0.3f, 0}, {200, 10, 10}},
         Vertex{{0.1f, 0.7f, 0}, {200, 10, 10}}});
  std::vector<ScenePartition> parts{{0, m, true}};
  const Framebuffer fb = render_sequential(parts, cam, 64, 48);
  auto s = project_triangle(camera_matrix(cam, 64, 48), m.triangles()[0], 64, 48);
  REQUIRE(s);
  int covered = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool c = covers(*s, x, y);
      covered += c;
      CHECK((fb.color_at(x, y) == Rgba8{200, 10, 10, 255}) == c);
      CHECK(fb.depth_at(x, y) >= 0.0f);
      CHECK(fb.depth_at(x, y) <= 1.0f);
    }
  }
  CHECK(covered > 100);

  const Mesh sphere = gen_reference_sphere();
  std::vector<ScenePartition> sp{{0, sphere, true}};
  CHECK(render_sequential(sp, cam, 96, 64) == render_sequential(sp, cam, 96, 64));
}

TEST_CASE("tiles of a grid are disjoint and cover the mural") {
  const TileGrid g{3, 4, 17, 11};
  std::vector<int> hits(static_cast<std::size_t>(g.mural_w() * g.mural_h()), 0);
  for (const TileRect& t : g.tiles()) {
    CHECK(g.tile(g.index(t.id)).rect == t.rect);
    for (int y = t.rect.y; y < t.rect.y + t.rect.h; ++y) {
      for (int x = t.rect.x; x < t.rect.x + t.rect.w; ++x) ++hits[static_cast<std::size_t>(y * g.mural_w() + x)];
    }
  }
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}

TEST_CASE("ppm encoding") {
  Framebuffer fb(3, 2);
  fb.set(2, 1, {1, 2, 3, 255}, 0.5f);
  const Bytes ppm = encode_ppm(fb);
  const std::string header = "P6\n3 2\n255\n";
  REQUIRE(ppm.size() == header.size() + 18);
  CHECK(std::equal(header.begin(), header.end(), ppm.begin()));
  CHECK(ppm[ppm.size() - 3] == 1);
  CHECK(ppm[ppm.size() - 1] == 3);
}
