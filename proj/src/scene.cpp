#include "tilewall/scene.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tw {

namespace {

// mt19937_64 is bit-exact across standard libraries; the distributions in
// <random> are not, so unit floats are derived from the raw output.
float unit_float(std::mt19937_64& rng) { return static_cast<float>(rng() >> 40) * 0x1p-24f; }

float symmetric_float(std::mt19937_64& rng) { return unit_float(rng) * 2.0f - 1.0f; }

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

void Aabb::extend(Vec3 p) {
  min = {std::min(min.x, p.x), std::min(min.y, p.y), std::min(min.z, p.z)};
  max = {std::max(max.x, p.x), std::max(max.y, p.y), std::max(max.z, p.z)};
}

bool Aabb::contains(Vec3 p) const {
  return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z && p.z <= max.z;
}

Mesh::Mesh(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
  for (const Triangle& t : triangles_) {
    for (const Vertex& v : t) bounds_.extend(v.position);
  }
}

void Mesh::add(const Triangle& t) {
  for (const Vertex& v : t) {
    if (!is_finite(v.position)) throw std::invalid_argument("vertex position must be finite");
    bounds_.extend(v.position);
  }
  triangles_.push_back(t);
}

VolumeGrid::VolumeGrid(std::array<std::uint32_t, 3> d, std::vector<std::uint8_t> voxels)
    : dims(d), data(std::move(voxels)) {
  if (d[0] == 0 || d[1] == 0 || d[2] == 0) throw std::invalid_argument("volume dims must be positive");
  if (data.size() != static_cast<std::size_t>(d[0]) * d[1] * d[2]) {
    throw std::invalid_argument("volume data length must equal dx*dy*dz");
  }
}

Mesh gen_spiked_sphere(int meridians, int parallels, int spikes, float radius) {
  if (meridians < 3 || parallels < 3) throw std::invalid_argument("spiked sphere needs meridians >= 3 and parallels >= 3");
  if (spikes < 0) throw std::invalid_argument("spike count must be non-negative");
  if (!(radius > 0.0f) || !std::isfinite(radius)) throw std::invalid_argument("radius must be positive");

  const float pi = std::numbers::pi_v<float>;
  auto ring_vertex = [&](int i, int j) {
    const float theta = pi * static_cast<float>(j) / static_cast<float>(parallels - 1);
    const float phi = 2.0f * pi * static_cast<float>(i % meridians) / static_cast<float>(meridians);
    const Vec3 p{std::sin(theta) * std::cos(phi), std::cos(theta), std::sin(theta) * std::sin(phi)};
    const auto shade = static_cast<std::uint8_t>(96 + (159 * j) / (parallels - 1));
    return Vertex{p * radius, Color{shade, shade, static_cast<std::uint8_t>(255 - shade / 2)}};
  };

  Mesh mesh;
  mesh.reserve(static_cast<std::size_t>(2 * meridians * (parallels - 1) + 4 * spikes));
  for (int j = 0; j + 1 < parallels; ++j) {
    for (int i = 0; i < meridians; ++i) {
      const Vertex a = ring_vertex(i, j);
      const Vertex b = ring_vertex(i + 1, j);
      const Vertex c = ring_vertex(i + 1, j + 1);
      const Vertex d = ring_vertex(i, j + 1);
      // Pole bands produce one zero-area triangle per quad; they are kept so
      // the count formula holds.
      mesh.add({a, b, c});
      mesh.add({a, c, d});
    }
  }

  std::mt19937_64 rng(0x5350494b45ull);  // fixed: spike placement is cosmetic
  const Color spike_color{240, 140, 40};
  const float base = 0.04f * radius;
  const float height = 0.25f * radius;
  for (int s = 0; s < spikes; ++s) {
    const float z = symmetric_float(rng);
    const float phi = 2.0f * pi * unit_float(rng);
    const float ring = std::sqrt(std::max(0.0f, 1.0f - z * z));
    const Vec3 n{ring * std::cos(phi), ring * std::sin(phi), z};
    const Vec3 helper = std::abs(n.x) < 0.9f ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 t1 = normalize(cross(n, helper));
    const Vec3 t2 = cross(n, t1);
    std::array<Vertex, 3> ring_pts;
    for (int k = 0; k < 3; ++k) {
      const float a = 2.0f * pi * static_cast<float>(k) / 3.0f;
      ring_pts[k] = {n * radius + (t1 * std::cos(a) + t2 * std::sin(a)) * base, spike_color};
    }
    const Vertex apex{n * (radius + height), Color{255, 220, 120}};
    mesh.add({ring_pts[0], ring_pts[1], apex});
    mesh.add({ring_pts[1], ring_pts[2], apex});
    mesh.add({ring_pts[2], ring_pts[0], apex});
    mesh.add({ring_pts[0], ring_pts[2], ring_pts[1]});
  }
  return mesh;
}

Mesh gen_synthetic_scene(std::size_t target_wire_bytes, std::uint64_t seed) {
  if (target_wire_bytes < kWireTriangleBytes) {
    throw std::invalid_argument("target wire size is smaller than one triangle (48 bytes)");
  }
  const std::size_t count = target_wire_bytes / kWireTriangleBytes;
  std::mt19937_64 rng(seed);
  Mesh mesh;
  mesh.reserve(count);

  Vec3 center;
  Color color;
  for (std::size_t i = 0; i < count; ++i) {
    if (i % kSyntheticClusterSize == 0) {
      center = Vec3{symmetric_float(rng), symmetric_float(rng), symmetric_float(rng)} * 0.85f;
      color = {static_cast<std::uint8_t>(64 + (rng() & 0xbf)), static_cast<std::uint8_t>(64 + (rng() & 0xbf)),
               static_cast<std::uint8_t>(64 + (rng() & 0xbf))};
    }
    const Vec3 centroid = center + Vec3{symmetric_float(rng), symmetric_float(rng), symmetric_float(rng)} * 0.06f;
    Triangle t;
    for (Vertex& v : t) {
      v.position = centroid + Vec3{symmetric_float(rng), symmetric_float(rng), symmetric_float(rng)} * 0.025f;
      v.color = color;
    }
    mesh.add(t);
  }
  return mesh;
}

std::vector<ScenePartition> partition_scene(const Mesh& mesh, std::size_t n, PartitionStrategy strategy,
                                            bool cacheable) {
  if (n == 0) throw std::invalid_argument("partition count must be positive");
  const auto& tris = mesh.triangles();
  std::vector<std::vector<Triangle>> parts(n);
  if (strategy == PartitionStrategy::contiguous) {
    const std::size_t base = tris.size() / n;
    const std::size_t extra = tris.size() % n;
    std::size_t begin = 0;
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t len = base + (r < extra ? 1 : 0);
      parts[r].assign(tris.begin() + static_cast<std::ptrdiff_t>(begin),
                      tris.begin() + static_cast<std::ptrdiff_t>(begin + len));
      begin += len;
    }
  } else {
    for (std::size_t i = 0; i < tris.size(); ++i) parts[i % n].push_back(tris[i]);
  }

  std::vector<ScenePartition> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    out.push_back({static_cast<std::uint32_t>(r), Mesh(std::move(parts[r])), cacheable});
  }
  return out;
}

void append_wire(Bytes& out, const Triangle& t) {
  ByteWriter w(out);
  for (const Vertex& v : t) {
    w.f32(v.position.x);
    w.f32(v.position.y);
    w.f32(v.position.z);
    w.u8(v.color.r);
    w.u8(v.color.g);
    w.u8(v.color.b);
    w.u8(0);
  }
}

Triangle read_wire_triangle(ByteReader& in) {
  Triangle t;
  for (Vertex& v : t) {
    v.position.x = in.f32();
    v.position.y = in.f32();
    v.position.z = in.f32();
    v.color.r = in.u8();
    v.color.g = in.u8();
    v.color.b = in.u8();
    in.u8();
  }
  return t;
}

Bytes serialize(const Mesh& mesh) {
  Bytes out;
  out.reserve(wire_size(mesh));
  for (const Triangle& t : mesh.triangles()) append_wire(out, t);
  return out;
}

Mesh parse_stl(ByteView bytes, Color color) {
  ByteReader in(bytes);
  in.take(80);
  const std::uint32_t count = in.u32();
  if (!in.ok()) throw std::runtime_error("STL: file shorter than the 84-byte header");
  if (in.remaining() < static_cast<std::size_t>(count) * 50) throw std::runtime_error("STL: truncated triangle records");
  Mesh mesh;
  mesh.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    in.take(12);  // facet normal, (ignored)
    Triangle t;
    for (Vertex& v : t) {
      v.position = {in.f32(), in.f32(), in.f32()};
      v.color = color;
    }
    in.u16();
    if (!is_finite(t[0].position) || !is_finite(t[1].position) || !is_finite(t[2].position)) {
      throw std::runtime_error("STL: non-finite vertex in triangle " + std::to_string(i));
    }
    mesh.add(t);
  }
  return mesh;
}

Mesh load_stl(const std::filesystem::path& path, Color color) { return parse_stl(read_file(path), color); }

VolumeGrid parse_volume(ByteView bytes) {
  ByteReader in(bytes);
  const std::array<std::uint32_t, 3> dims{in.u32(), in.u32(), in.u32()};
  if (!in.ok()) throw std::runtime_error("volume: missing 12-byte dims header");
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (n == 0) throw std::runtime_error("volume: dims must be positive");
  if (in.remaining() != n) throw std::runtime_error("volume: voxel count does not match dims");
  const ByteView voxels = in.take(n);
  return VolumeGrid(dims, std::vector<std::uint8_t>(voxels.begin(), voxels.end()));
}

VolumeGrid load_volume(const std::filesystem::path& path) { return parse_volume(read_file(path)); }

Bytes serialize(const VolumeGrid& vol) {
  Bytes out;
  ByteWriter w(out);
  for (std::uint32_t d : vol.dims) w.u32(d);
  w.bytes(vol.data);
  return out;
}

VolumeGrid gen_random_volume(std::array<std::uint32_t, 3> dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> data(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]);
  for (auto& v : data) v = static_cast<std::uint8_t>(rng() & 0xff);
  return VolumeGrid(dims, std::move(data));
}

PartitionStrategy parse_partition_strategy(const std::string& name) {
  if (name == "contiguous") return PartitionStrategy::contiguous;
  if (name == "interleaved") return PartitionStrategy::interleaved;
  throw std::invalid_argument("unknown partition strategy '" + name + "'");
}

}  // namespace tw
