#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tilewall/bytes.hpp"
#include "tilewall/raster.hpp"
#include "tilewall/wire/codec.hpp"

namespace tw::interact {

/// Master -> viewer messages. Header: "PM", version 1, kind, payload_length u32.
enum class UiKind : std::uint8_t { hello = 0x20, frame = 0x21, stats = 0x22 };

inline constexpr std::size_t kUiHeaderBytes = 8;

struct UiHello {
  std::uint32_t session_id = 0;
  std::uint16_t mural_w = 0;
  std::uint16_t mural_h = 0;
  std::uint8_t mode = 0;
  bool caching = false;
  friend bool operator==(const UiHello&, const UiHello&) = default;
};

/// Per-row run-length encoded RGBA image. Each row is a sequence of
/// (run u16, r, g, b, a) runs covering exactly w pixels; runs never span rows.
struct UiFrame {
  std::uint32_t frame_no = 0;
  std::uint16_t w = 0;
  std::uint16_t h = 0;
  Bytes rle;
  friend bool operator==(const UiFrame&, const UiFrame&) = default;
};

struct UiStats {
  float fps = 0.0f;
  std::vector<std::uint64_t> bytes_per_link;
  friend bool operator==(const UiStats&, const UiStats&) = default;
};

using UiMessage = std::variant<UiHello, UiFrame, UiStats>;

Bytes rle_encode(const Framebuffer& fb);
/// Throws ProtocolError when the runs do not tile a w x h image.
std::vector<Rgba8> rle_decode(ByteView rle, int w, int h);

UiFrame make_ui_frame(std::uint32_t frame_no, const Framebuffer& fb);

Bytes encode_ui(const UiMessage& msg);

struct UiDecodeResult {
  wire::DecodeStatus status = wire::DecodeStatus::truncated;
  UiMessage message;
  std::size_t consumed = 0;
  std::string error;
};

UiDecodeResult decode_ui(ByteView bytes);

}  // namespace tw::interact
