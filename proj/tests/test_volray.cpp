#include "doctest.h"

#include <chrono>
#include <random>

#include "support.hpp"
#include "tilewall/cluster/job.hpp"
#include "tilewall/volray.hpp"

using namespace tw;
using namespace tw::volray;

namespace {

CameraState random_camera(std::mt19937_64& rng) {
  CameraState c;
  const float a = tw::testing::rand_float(rng, -3.1f, 3.1f);
  const Vec3 axis = normalize(Vec3{tw::testing::rand_float(rng, -1, 1), tw::testing::rand_float(rng, -1, 1),
                                   tw::testing::rand_float(rng, -1, 1)});
  c.orientation = normalize(Quat{std::cos(a / 2), axis.x * std::sin(a / 2), axis.y * std::sin(a / 2), axis.z * std::sin(a / 2)});
  c.focal_distance = tw::testing::rand_float(rng, 1.2f, 4.0f);
  c.center = {tw::testing::rand_float(rng, -0.2f, 0.2f), tw::testing::rand_float(rng, -0.2f, 0.2f), 0.0f};
  return c;
}

std::uint64_t volume_frame_bytes(std::array<std::uint32_t, 3> dims, int tile) {
  const TileGrid grid{2, 2, tile, tile};
  std::uint64_t total = 0;
  const auto vol = std::make_shared<const VolumeGrid>(gen_random_volume(dims, 5));
  for (std::uint32_t r = 0; r < 4; ++r) {
    std::vector<tw::testing::RecordingSink> sinks(4);
    std::vector<wire::ByteSink*> ptrs;
    for (auto& s : sinks) ptrs.push_back(&s);
    cluster::AppNode node({r, 4, cluster::DisplayMode::tiled, grid}, vol, ptrs);
    const cluster::FrameTraffic t = node.render_frame(CameraState{}, false);
    CHECK(t.total_geometry() == 0);
    std::uint64_t sent = 0;
    for (const auto& s : sinks) sent += s.data.size();
    CHECK(sent == t.total());
    total += t.total();
  }
  return total;
}

}  // namespace

TEST_CASE("zero volume renders black") {
  const VolumeGrid vol({8, 8, 8}, std::vector<std::uint8_t>(512, 0));
  const auto img = raycast_mip(vol, CameraState{}, {0, 0, 40, 30}, 40, 30, default_step(vol));
  CHECK(img.size() == 1200);
  CHECK(std::all_of(img.begin(), img.end(), [](std::uint8_t v) { return v == 0; }));
}

TEST_CASE("centre voxel shows at the centre pixel") {
  std::vector<std::uint8_t> data(27, 0);
  data[13] = 255;
  const VolumeGrid vol({3, 3, 3}, data);
  const auto img = raycast_mip(vol, CameraState{}, {0, 0, 65, 65}, 65, 65, default_step(vol));
  CHECK(img[32 * 65 + 32] == 255);
  CHECK(img[0] == 0);
  // Region offsets address the same mural pixel.
  CHECK(raycast_mip(vol, CameraState{}, {30, 30, 5, 5}, 65, 65, default_step(vol))[2 * 5 + 2] == 255);
}

TEST_CASE("raycast rejects bad arguments") {
  const VolumeGrid vol = gen_random_volume({4, 4, 4}, 1);
  CHECK_THROWS_AS(raycast_mip(vol, CameraState{}, {0, 0, 0, 4}, 8, 8, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(raycast_mip(vol, CameraState{}, {0, 0, 4, 4}, 8, 8, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(raycast_mip(vol, CameraState{}, {6, 6, 4, 4}, 8, 8, 0.1), std::invalid_argument);
  CHECK(default_step(gen_random_volume({4, 16, 8}, 1)) == 0.5 / 16);
}

TEST_CASE("raycast equals the brute-force MIP") {
  const VolumeGrid vol = gen_random_volume({32, 32, 32}, 9);
  std::mt19937_64 rng(12);
  std::vector<CameraState> cams{CameraState{}};
  for (int i = 0; i < 4; ++i) cams.push_back(random_camera(rng));
  for (const CameraState& cam : cams) {
    const PixelRect region{0, 0, 64, 64};
    const auto got = raycast_mip(vol, cam, region, 64, 64, default_step(vol));
    const auto want = tw::testing::brute_force_mip(vol, cam, region, 64, 64, default_step(vol));
    CHECK(got == want);
    CHECK(std::count(got.begin(), got.end(), 0) < 64 * 64);
  }
  // A region off the mural origin, non-square mural.
  const CameraState cam = random_camera(rng);
  const PixelRect sub{10, 7, 30, 20};
  CHECK(raycast_mip(vol, cam, sub, 80, 48, 0.013) == tw::testing::brute_force_mip(vol, cam, sub, 80, 48, 0.013));
}

TEST_CASE("bands") {
  for (std::uint32_t r = 0; r < 4; ++r) {
    const PixelRect b = band(r, 4, 512, 512);
    CHECK(b.x == 0);
    CHECK(b.y == static_cast<int>(128 * r));
    CHECK(b.w == 512);
    CHECK(b.h == 128);
  }
  int covered = 0;
  for (std::uint32_t r = 0; r < 3; ++r) covered += band(r, 3, 10, 100).h;
  CHECK(covered == 100);
  CHECK_THROWS(band(4, 4, 10, 10));
}

TEST_CASE("bands are independent") {
  const VolumeGrid vol = gen_random_volume({16, 16, 16}, 4);
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 3; ++trial) {
    const CameraState cam = random_camera(rng);
    const auto full = raycast_mip(vol, cam, {0, 0, 96, 64}, 96, 64, default_step(vol));
    for (std::uint32_t n : {2u, 3u, 5u}) {
      std::vector<std::uint8_t> joined;
      for (std::uint32_t r = 0; r < n; ++r) {
        const auto part = raycast_mip(vol, cam, band(r, n, 96, 64), 96, 64, default_step(vol));
        joined.insert(joined.end(), part.begin(), part.end());
      }
      CHECK(joined == full);
    }
  }
}

TEST_CASE("band blits clip to targets") {
  const PixelRect b{0, 10, 8, 4};
  std::vector<std::uint8_t> gray(32);
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<std::uint8_t>(i);
  const auto blits = band_blits(gray, b, {{0, 0, 4, 12}, {4, 0, 4, 12}, {0, 12, 8, 8}, {0, 0, 8, 5}});
  REQUIRE(blits.size() == 3);
  CHECK(blits[0].x == 0);
  CHECK(blits[0].y == 10);
  CHECK(blits[0].w == 4);
  CHECK(blits[0].h == 2);
  CHECK(blits[1].pixels[0] == Rgba8{4, 4, 4, 255});
  CHECK(blits[2].y == 12);
  CHECK(blits[2].pixels.back() == Rgba8{31, 31, 31, 255});
}

TEST_CASE("volume frame bytes depend only on the mural") {
  const std::uint64_t small = volume_frame_bytes({32, 32, 32}, 64);
  const std::uint64_t large = volume_frame_bytes({128, 128, 128}, 64);
  CHECK(small == large);
  const std::uint64_t pixels = 128ull * 128ull * 4ull;
  CHECK(small >= pixels);
  CHECK(small < pixels + pixels / 20);
}

TEST_CASE("distributed volume frame equals the full-mural MIP") {
  cluster::JobConfig cfg;
  cfg.app_nodes = 3;
  cfg.tile_width = 40;
  cfg.tile_height = 24;
  cfg.scene.kind = cluster::SceneSpec::Kind::volume;
  cfg.scene.dims = {20, 12, 16};
  const auto vol = cluster::build_volume(cfg.scene);
  cluster::LocalJob job(cfg, vol);
  auto f = job.next_frame(std::chrono::seconds(10));
  REQUIRE(f);
  job.quit();
  const TileGrid g = cfg.grid();
  const auto want = raycast_mip(*vol, CameraState{}, {0, 0, g.mural_w(), g.mural_h()}, g.mural_w(), g.mural_h(),
                                default_step(*vol));
  REQUIRE(f->image.color().size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    const Rgba8 c = f->image.color()[i];
    REQUIRE(c == Rgba8{want[i], want[i], want[i], 255});
  }
}
