#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "tilewall/bytes.hpp"
#include "tilewall/math.hpp"
#include "tilewall/raster.hpp"
#include "tilewall/scene.hpp"

namespace tw::wire {

/// Violation of the command or event protocol. Aborts the current frame.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Opcode : std::uint8_t {
  begin_frame = 0x10,
  clear = 0x11,
  set_camera = 0x12,
  draw_triangles = 0x13,
  define_list = 0x14,
  call_list = 0x15,
  barrier = 0x16,
  swap = 0x17,
  blit_image = 0x18,
  end_frame = 0x19,
};

inline constexpr std::uint8_t kMagic0 = 0x43;  // 'C'
inline constexpr std::uint8_t kMagic1 = 0x57;  // 'W'
inline constexpr std::uint8_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 8;
/// Largest payload a decoder accepts; anything above is malformed.
inline constexpr std::uint32_t kMaxPayload = 256u << 20;

struct BeginFrame {
  std::uint32_t frame_no = 0;
  std::uint16_t sender_rank = 0;
  friend bool operator==(const BeginFrame&, const BeginFrame&) = default;
};

struct Clear {
  Rgba8 color = kBackground;
  float depth = 1.0f;
  friend bool operator==(const Clear&, const Clear&) = default;
};

struct SetCamera {
  Mat4 matrix;
  friend bool operator==(const SetCamera&, const SetCamera&) = default;
};

struct DrawTriangles {
  std::vector<Triangle> triangles;
  friend bool operator==(const DrawTriangles&, const DrawTriangles&) = default;
};

/// Display list body. Only draws are representable.
struct DefineList {
  std::uint32_t id = 0;
  std::vector<DrawTriangles> draws;
  friend bool operator==(const DefineList&, const DefineList&) = default;
};

struct CallList {
  std::uint32_t id = 0;
  friend bool operator==(const CallList&, const CallList&) = default;
};

struct Barrier {
  std::uint32_t barrier_id = 0;
  friend bool operator==(const Barrier&, const Barrier&) = default;
};

struct Swap {
  bool suppress = false;
  friend bool operator==(const Swap&, const Swap&) = default;
};

/// RGBA8 pixels, row-major, placed at (x, y) in mural coordinates.
struct BlitImage {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint16_t w = 0;
  std::uint16_t h = 0;
  std::vector<Rgba8> pixels;
  friend bool operator==(const BlitImage&, const BlitImage&) = default;
};

struct EndFrame {
  std::uint32_t frame_no = 0;
  friend bool operator==(const EndFrame&, const EndFrame&) = default;
};

using Command = std::variant<BeginFrame, Clear, SetCamera, DrawTriangles, DefineList, CallList, Barrier, Swap,
                             BlitImage, EndFrame>;

Opcode opcode_of(const Command& cmd);
const char* opcode_name(Opcode op);

/// Geometry-carrying commands (DRAW_TRIANGLES, DEFINE_LIST).
bool is_geometry(const Command& cmd);

/// Appends the framed command; returns the number of bytes written.
std::size_t encode(const Command& cmd, Bytes& out);
Bytes encode(const Command& cmd);
/// Exact encoded size without encoding.
std::size_t encoded_size(const Command& cmd);

enum class DecodeStatus { ok, truncated, malformed };

struct DecodeResult {
  DecodeStatus status = DecodeStatus::truncated;
  Command command;
  /// Bytes of the frame on success; 0 otherwise.
  std::size_t consumed = 0;
  /// Human-readable reason when malformed.
  std::string error;
};

/// Classifies the start of `bytes` as one complete valid frame, a prefix that
/// needs more bytes, or malformed input. Never looks past the declared length.
DecodeResult decode(ByteView bytes);

/// Incremental decoder for one connection.
class StreamDecoder {
 public:
  void feed(ByteView bytes);
  /// Next complete command, or nullopt if more bytes are needed.
  /// Throws ProtocolError on malformed input.
  std::optional<Command> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

}  // namespace tw::wire
