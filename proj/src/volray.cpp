#include "tilewall/volray.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tw::volray {

namespace {

struct DVec {
  double x, y, z;
};

DVec rotate_d(const Quat& q, DVec v) {
  const double w = q.w, qx = q.x, qy = q.y, qz = q.z;
  // t = 2 * cross(q.xyz, v); v' = v + w * t + cross(q.xyz, t)
  const double tx = 2.0 * (qy * v.z - qz * v.y);
  const double ty = 2.0 * (qz * v.x - qx * v.z);
  const double tz = 2.0 * (qx * v.y - qy * v.x);
  return {v.x + w * tx + (qy * tz - qz * ty), v.y + w * ty + (qz * tx - qx * tz), v.z + w * tz + (qx * ty - qy * tx)};
}

// Ray parameter interval inside [-0.5, 0.5]^3, or false when the ray misses.
bool slab(const DVec& o, const DVec& d, double& t0, double& t1) {
  t0 = 0.0;
  t1 = 1e300;
  const double os[3] = {o.x, o.y, o.z};
  const double ds[3] = {d.x, d.y, d.z};
  for (int i = 0; i < 3; ++i) {
    if (ds[i] == 0.0) {
      if (os[i] < -0.5 || os[i] > 0.5) return false;
      continue;
    }
    double a = (-0.5 - os[i]) / ds[i];
    double b = (0.5 - os[i]) / ds[i];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  return t0 <= t1;
}

}  // namespace

double default_step(const VolumeGrid& vol) {
  const std::uint32_t m = std::max({vol.dims[0], vol.dims[1], vol.dims[2]});
  return 0.5 / static_cast<double>(m);
}

std::vector<std::uint8_t> raycast_mip(const VolumeGrid& vol, const CameraState& cam, const PixelRect& region,
                                      int mural_w, int mural_h, double step) {
  if (region.empty()) throw std::invalid_argument("raycast region is empty");
  if (!(step > 0.0)) throw std::invalid_argument("raycast step must be positive");
  if (!PixelRect{0, 0, mural_w, mural_h}.contains(region)) throw std::invalid_argument("raycast region outside mural");

  const DVec right = rotate_d(cam.orientation, {1, 0, 0});
  const DVec up = rotate_d(cam.orientation, {0, 1, 0});
  const DVec back = rotate_d(cam.orientation, {0, 0, 1});
  const double f = cam.focal_distance;
  const DVec eye{cam.center.x + back.x * f, cam.center.y + back.y * f, cam.center.z + back.z * f};
  const double tan_half = std::tan(static_cast<double>(cam.fov_y) * 0.5);
  const double aspect = static_cast<double>(mural_w) / static_cast<double>(mural_h);
  const double dims[3] = {static_cast<double>(vol.dims[0]), static_cast<double>(vol.dims[1]),
                          static_cast<double>(vol.dims[2])};

  std::vector<std::uint8_t> out(static_cast<std::size_t>(region.w) * region.h, 0);
  for (int py = region.y; py < region.y + region.h; ++py) {
    for (int px = region.x; px < region.x + region.w; ++px) {
      const double sx = (2.0 * (px + 0.5) / mural_w - 1.0) * aspect * tan_half;
      const double sy = (1.0 - 2.0 * (py + 0.5) / mural_h) * tan_half;
      DVec d{right.x * sx + up.x * sy - back.x, right.y * sx + up.y * sy - back.y, right.z * sx + up.z * sy - back.z};
      const double len = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
      d = {d.x / len, d.y / len, d.z / len};

      double t0, t1;
      if (!slab(eye, d, t0, t1)) continue;
      // The slab only bounds the loop; the per-sample inside test decides.
      const auto k0 = static_cast<long long>(std::max(0.0, std::floor(t0 / step) - 1.0));
      const auto k1 = static_cast<long long>(std::ceil(t1 / step) + 1.0);
      std::uint8_t best = 0;
      for (long long k = k0; k <= k1; ++k) {
        const double t = static_cast<double>(k) * step;
        const double p[3] = {eye.x + d.x * t, eye.y + d.y * t, eye.z + d.z * t};
        if (p[0] < -0.5 || p[0] > 0.5 || p[1] < -0.5 || p[1] > 0.5 || p[2] < -0.5 || p[2] > 0.5) continue;
        std::uint32_t idx[3];
        for (int i = 0; i < 3; ++i) {
          const double v = std::floor((p[i] + 0.5) * dims[i]);
          idx[i] = static_cast<std::uint32_t>(std::min(v, dims[i] - 1.0));
        }
        best = std::max(best, vol.at(idx[0], idx[1], idx[2]));
      }
      out[static_cast<std::size_t>(py - region.y) * region.w + (px - region.x)] = best;
    }
  }
  return out;
}

PixelRect band(std::uint32_t rank, std::uint32_t n, int mural_w, int mural_h) {
  if (n == 0 || rank >= n) throw std::out_of_range("band rank out of range");
  const auto y0 = static_cast<int>(static_cast<long long>(mural_h) * rank / n);
  const auto y1 = static_cast<int>(static_cast<long long>(mural_h) * (rank + 1) / n);
  return {0, y0, mural_w, y1 - y0};
}

std::vector<wire::BlitImage> band_blits(const std::vector<std::uint8_t>& gray, const PixelRect& band,
                                        const std::vector<PixelRect>& targets) {
  std::vector<wire::BlitImage> out;
  for (const PixelRect& t : targets) {
    const PixelRect r = band.intersect(t);
    if (r.empty()) continue;
    wire::BlitImage b;
    b.x = static_cast<std::uint16_t>(r.x);
    b.y = static_cast<std::uint16_t>(r.y);
    b.w = static_cast<std::uint16_t>(r.w);
    b.h = static_cast<std::uint16_t>(r.h);
    b.pixels.reserve(static_cast<std::size_t>(r.w) * r.h);
    for (int y = r.y; y < r.y + r.h; ++y) {
      for (int x = r.x; x < r.x + r.w; ++x) {
        const std::uint8_t g = gray[static_cast<std::size_t>(y - band.y) * band.w + (x - band.x)];
        b.pixels.push_back({g, g, g, 255});
      }
    }
    out.push_back(std::move(b));
  }
  return out;
}

}  // namespace tw::volray
