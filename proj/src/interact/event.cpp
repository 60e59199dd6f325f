#include "tilewall/interact/event.hpp"

#include <cmath>

namespace tw::interact {

using wire::DecodeStatus;

const char* to_string(EventKind kind) {
  switch (kind) {
    case EventKind::pointer_down: return "POINTER_DOWN";
    case EventKind::pointer_move: return "POINTER_MOVE";
    case EventKind::pointer_up: return "POINTER_UP";
    case EventKind::wheel: return "WHEEL";
    case EventKind::key: return "KEY";
    case EventKind::set_mode: return "SET_MODE";
    case EventKind::quit: return "QUIT";
    case EventKind::toggle_cache: return "TOGGLE_CACHE";
  }
  return "?";
}

EventMsg pointer_down(std::uint8_t button, float x, float y) {
  return {.kind = EventKind::pointer_down, .button = button, .x = x, .y = y};
}
EventMsg pointer_move(std::uint8_t button, float x, float y) {
  return {.kind = EventKind::pointer_move, .button = button, .x = x, .y = y};
}
EventMsg pointer_up(std::uint8_t button) { return {.kind = EventKind::pointer_up, .button = button}; }
EventMsg wheel(float delta) { return {.kind = EventKind::wheel, .delta = delta}; }
EventMsg key(std::uint32_t code, bool down) { return {.kind = EventKind::key, .key_code = code, .key_down = down}; }
EventMsg set_mode(std::uint8_t mode) { return {.kind = EventKind::set_mode, .mode = mode}; }
EventMsg quit() { return {.kind = EventKind::quit}; }
EventMsg toggle_cache() { return {.kind = EventKind::toggle_cache}; }

std::size_t event_payload_size(EventKind kind) {
  switch (kind) {
    case EventKind::pointer_down:
    case EventKind::pointer_move: return 9;
    case EventKind::pointer_up: return 1;
    case EventKind::wheel: return 4;
    case EventKind::key: return 5;
    case EventKind::set_mode: return 1;
    case EventKind::quit:
    case EventKind::toggle_cache: return 0;
  }
  return 0;
}

std::size_t encoded_size(const EventMsg& e) { return kEventHeaderBytes + event_payload_size(e.kind); }

std::size_t encode_event(const EventMsg& e, Bytes& out) {
  const std::size_t start = out.size();
  ByteWriter w(out);
  w.u8(kEventMagic0);
  w.u8(kEventMagic1);
  w.u8(kEventVersion);
  w.u8(static_cast<std::uint8_t>(e.kind));
  w.u32(e.seq);
  w.u16(static_cast<std::uint16_t>(event_payload_size(e.kind)));
  switch (e.kind) {
    case EventKind::pointer_down:
    case EventKind::pointer_move:
      w.u8(e.button);
      w.f32(e.x);
      w.f32(e.y);
      break;
    case EventKind::pointer_up: w.u8(e.button); break;
    case EventKind::wheel: w.f32(e.delta); break;
    case EventKind::key:
      w.u32(e.key_code);
      w.u8(e.key_down ? 1 : 0);
      break;
    case EventKind::set_mode: w.u8(e.mode); break;
    case EventKind::quit:
    case EventKind::toggle_cache: break;
  }
  return out.size() - start;
}

Bytes encode_event(const EventMsg& e) {
  Bytes out;
  encode_event(e, out);
  return out;
}

namespace {

EventDecodeResult malformed(std::string why) {
  EventDecodeResult r;
  r.status = DecodeStatus::malformed;
  r.error = std::move(why);
  return r;
}

bool known_kind(std::uint8_t k) { return k >= 0x01 && k <= 0x08; }

}  // namespace

EventDecodeResult decode_event(ByteView bytes) {
  if (!bytes.empty() && bytes[0] != kEventMagic0) return malformed("bad magic");
  if (bytes.size() > 1 && bytes[1] != kEventMagic1) return malformed("bad magic");
  if (bytes.size() > 2 && bytes[2] != kEventVersion) return malformed("unsupported version " + std::to_string(bytes[2]));
  if (bytes.size() > 3 && !known_kind(bytes[3])) return malformed("unknown event kind " + std::to_string(bytes[3]));
  if (bytes.size() < kEventHeaderBytes) return {};

  ByteReader header(bytes.first(kEventHeaderBytes));
  header.take(3);
  EventMsg e;
  e.kind = static_cast<EventKind>(header.u8());
  e.seq = header.u32();
  const std::uint16_t len = header.u16();
  if (len != event_payload_size(e.kind)) {
    return malformed(std::string(to_string(e.kind)) + " has invalid payload length " + std::to_string(len));
  }
  if (bytes.size() - kEventHeaderBytes < len) return {};

  ByteReader in(bytes.subspan(kEventHeaderBytes, len));
  switch (e.kind) {
    case EventKind::pointer_down:
    case EventKind::pointer_move:
      e.button = in.u8();
      e.x = in.f32();
      e.y = in.f32();
      if (!std::isfinite(e.x) || !std::isfinite(e.y)) return malformed("pointer coordinates are not finite");
      break;
    case EventKind::pointer_up: e.button = in.u8(); break;
    case EventKind::wheel:
      e.delta = in.f32();
      if (!std::isfinite(e.delta)) return malformed("wheel delta is not finite");
      break;
    case EventKind::key: {
      e.key_code = in.u32();
      const std::uint8_t down = in.u8();
      if (down > 1) return malformed("KEY down flag must be 0 or 1");
      e.key_down = down == 1;
      break;
    }
    case EventKind::set_mode:
      e.mode = in.u8();
      if (e.mode > 1) return malformed("SET_MODE mode must be 0 or 1");
      break;
    case EventKind::quit:
    case EventKind::toggle_cache: break;
  }
  EventDecodeResult r;
  r.status = DecodeStatus::ok;
  r.event = e;
  r.consumed = kEventHeaderBytes + len;
  return r;
}

void EventStreamDecoder::feed(ByteView bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (1u << 16) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<EventMsg> EventStreamDecoder::next() {
  EventDecodeResult r = decode_event(ByteView(buffer_).subspan(offset_));
  switch (r.status) {
    case DecodeStatus::ok: offset_ += r.consumed; return r.event;
    case DecodeStatus::truncated: return std::nullopt;
    case DecodeStatus::malformed: break;
  }
  throw ProtocolError("malformed event frame: " + r.error);
}

}  // namespace tw::interact
