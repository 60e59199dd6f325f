#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>

#include "tilewall/bytes.hpp"
#include "tilewall/wire/codec.hpp"

namespace tw::interact {

using wire::ProtocolError;

enum class EventKind : std::uint8_t {
  pointer_down = 0x01,
  pointer_move = 0x02,
  pointer_up = 0x03,
  wheel = 0x04,
  key = 0x05,
  set_mode = 0x06,
  quit = 0x07,
  toggle_cache = 0x08,
};

const char* to_string(EventKind kind);

inline constexpr std::uint8_t kEventMagic0 = 0x50;  // 'P'
inline constexpr std::uint8_t kEventMagic1 = 0x4D;  // 'M'
inline constexpr std::uint8_t kEventVersion = 1;
/// magic(2) version(1) kind(1) seq(4) payload_length(2)
inline constexpr std::size_t kEventHeaderBytes = 10;

inline constexpr std::uint8_t kButtonRotate = 0;
inline constexpr std::uint8_t kButtonPan = 1;
inline constexpr std::uint8_t kButtonZoom = 2;

/// One ParaMouse input event. Only the fields of `kind` are encoded; the
/// others must stay at their defaults for round-trip equality.
struct EventMsg {
  EventKind kind = EventKind::quit;
  std::uint32_t seq = 0;
  std::uint8_t button = 0;
  float x = 0.0f;
  float y = 0.0f;
  float delta = 0.0f;
  std::uint32_t key_code = 0;
  bool key_down = false;
  std::uint8_t mode = 0;

  friend bool operator==(const EventMsg&, const EventMsg&) = default;
};

EventMsg pointer_down(std::uint8_t button, float x, float y);
EventMsg pointer_move(std::uint8_t button, float x, float y);
EventMsg pointer_up(std::uint8_t button);
EventMsg wheel(float delta);
EventMsg key(std::uint32_t code, bool down);
EventMsg set_mode(std::uint8_t mode);
EventMsg quit();
EventMsg toggle_cache();

std::size_t event_payload_size(EventKind kind);
std::size_t encoded_size(const EventMsg& e);
std::size_t encode_event(const EventMsg& e, Bytes& out);
Bytes encode_event(const EventMsg& e);

struct EventDecodeResult {
  wire::DecodeStatus status = wire::DecodeStatus::truncated;
  EventMsg event;
  std::size_t consumed = 0;
  std::string error;
};

/// Same classification contract as the command decoder: ok, truncated
/// (a valid prefix) or malformed.
EventDecodeResult decode_event(ByteView bytes);

class EventStreamDecoder {
 public:
  void feed(ByteView bytes);
  /// Throws ProtocolError on malformed input.
  std::optional<EventMsg> next();
  std::size_t buffered() const { return buffer_.size() - offset_; }

 private:
  Bytes buffer_;
  std::size_t offset_ = 0;
};

}  // namespace tw::interact
