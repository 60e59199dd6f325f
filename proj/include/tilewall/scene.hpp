#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tilewall/bytes.hpp"
#include "tilewall/math.hpp"

namespace tw {

struct Color {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Color&, const Color&) = default;
};

struct Vertex {
  Vec3 position;
  Color color;

  friend bool operator==(const Vertex&, const Vertex&) = default;
};

using Triangle = std::array<Vertex, 3>;

struct Aabb {
  Vec3 min{3.0e38f, 3.0e38f, 3.0e38f};
  Vec3 max{-3.0e38f, -3.0e38f, -3.0e38f};

  bool empty() const { return min.x > max.x; }
  void extend(Vec3 p);
  bool contains(Vec3 p) const;
};

/// Bytes one vertex occupies on the wire: 3 x f32 position, 3 x u8 color, 1 pad.
inline constexpr std::size_t kWireVertexBytes = 16;
inline constexpr std::size_t kWireTriangleBytes = 3 * kWireVertexBytes;

class Mesh {
 public:
  Mesh() = default;
  explicit Mesh(std::vector<Triangle> triangles);

  void add(const Triangle& t);
  void reserve(std::size_t n) { triangles_.reserve(n); }

  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Aabb& bounds() const { return bounds_; }
  std::size_t size() const { return triangles_.size(); }
  bool empty() const { return triangles_.empty(); }

 private:
  std::vector<Triangle> triangles_;
  Aabb bounds_;
};

struct ScenePartition {
  std::uint32_t rank = 0;
  Mesh mesh;
  bool cacheable = true;
};

enum class PartitionStrategy { contiguous, interleaved };

struct VolumeGrid {
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  std::vector<std::uint8_t> data;

  VolumeGrid() : data(1, 0) {}
  VolumeGrid(std::array<std::uint32_t, 3> dims, std::vector<std::uint8_t> data);

  std::uint8_t at(std::uint32_t x, std::uint32_t y, std::uint32_t z) const {
    return data[(static_cast<std::size_t>(z) * dims[1] + y) * dims[0] + x];
  }
};

/// UV sphere with tetrahedral spikes. Produces exactly
/// 2 * meridians * (parallels - 1) + 4 * spikes triangles.
Mesh gen_spiked_sphere(int meridians, int parallels, int spikes, float radius);

/// Tessellation yielding the 11,540-triangle test sphere.
inline Mesh gen_reference_sphere() { return gen_spiked_sphere(70, 42, 1450, 1.0f); }

/// Clustered random triangles whose wire size is the largest multiple of 48
/// not exceeding target_wire_bytes. Consecutive triangles share a cluster.
Mesh gen_synthetic_scene(std::size_t target_wire_bytes, std::uint64_t seed);

/// Triangles per spatial cluster in gen_synthetic_scene.
inline constexpr std::size_t kSyntheticClusterSize = 64;

std::vector<ScenePartition> partition_scene(const Mesh& mesh, std::size_t n, PartitionStrategy strategy,
                                            bool cacheable = true);

inline std::size_t wire_size(const Mesh& mesh) { return kWireTriangleBytes * mesh.size(); }

void append_wire(Bytes& out, const Triangle& t);
Triangle read_wire_triangle(ByteReader& in);
Bytes serialize(const Mesh& mesh);

/// Binary STL: 80-byte header, u32 count, 50-byte records. Vertices get the given color.
Mesh load_stl(const std::filesystem::path& path, Color color = {200, 200, 200});
Mesh parse_stl(ByteView bytes, Color color = {200, 200, 200});

/// Raw volume: 3 x u32 dims, then voxels x-fastest.
VolumeGrid load_volume(const std::filesystem::path& path);
VolumeGrid parse_volume(ByteView bytes);
Bytes serialize(const VolumeGrid& vol);

/// Seeded random volume with a few bright blobs, for benchmarks and tests.
VolumeGrid gen_random_volume(std::array<std::uint32_t, 3> dims, std::uint64_t seed);

PartitionStrategy parse_partition_strategy(const std::string& name);

}  // namespace tw
