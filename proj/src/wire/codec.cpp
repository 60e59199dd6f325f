#include "tilewall/wire/codec.hpp"

#include <cmath>

namespace tw::wire {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::size_t payload_size(const Command& cmd) {
  return std::visit(
      overloaded{
          [](const BeginFrame&) -> std::size_t { return 6; },
          [](const Clear&) -> std::size_t { return 8; },
          [](const SetCamera&) -> std::size_t { return 64; },
          [](const DrawTriangles& d) -> std::size_t { return 4 + d.triangles.size() * kWireTriangleBytes; },
          [](const DefineList& l) -> std::size_t {
            std::size_t n = 8;
            for (const DrawTriangles& d : l.draws) n += kHeaderBytes + 4 + d.triangles.size() * kWireTriangleBytes;
            return n;
          },
          [](const CallList&) -> std::size_t { return 4; },
          [](const Barrier&) -> std::size_t { return 4; },
          [](const Swap&) -> std::size_t { return 1; },
          [](const BlitImage& b) -> std::size_t { return 8 + b.pixels.size() * 4; },
          [](const EndFrame&) -> std::size_t { return 4; },
      },
      cmd);
}

void write_header(ByteWriter& w, Opcode op, std::size_t payload) {
  w.u8(kMagic0);
  w.u8(kMagic1);
  w.u8(kVersion);
  w.u8(static_cast<std::uint8_t>(op));
  w.u32(static_cast<std::uint32_t>(payload));
}

void write_draw(ByteWriter& w, Bytes& out, const DrawTriangles& d) {
  w.u32(static_cast<std::uint32_t>(d.triangles.size()));
  for (const Triangle& t : d.triangles) append_wire(out, t);
}

bool known_opcode(std::uint8_t op) { return op >= 0x10 && op <= 0x19; }

// Payload length for fixed-size opcodes, or the minimum for variable ones.
struct LengthRule {
  std::uint32_t size;
  bool exact;
};

LengthRule length_rule(Opcode op) {
  switch (op) {
    case Opcode::begin_frame: return {6, true};
    case Opcode::clear: return {8, true};
    case Opcode::set_camera: return {64, true};
    case Opcode::draw_triangles: return {4, false};
    case Opcode::define_list: return {8, false};
    case Opcode::call_list: return {4, true};
    case Opcode::barrier: return {4, true};
    case Opcode::swap: return {1, true};
    case Opcode::blit_image: return {8, false};
    case Opcode::end_frame: return {4, true};
  }
  return {0, false};
}

DecodeResult malformed(std::string why) {
  DecodeResult r;
  r.status = DecodeStatus::malformed;
  r.error = std::move(why);
  return r;
}

// Parses a DRAW_TRIANGLES payload; returns false if the length is inconsistent.
bool parse_draw(ByteView payload, DrawTriangles& out, std::string& error) {
  ByteReader in(payload);
  const std::uint32_t count = in.u32();
  if (payload.size() - 4 != static_cast<std::size_t>(count) * kWireTriangleBytes) {
    error = "DRAW_TRIANGLES count does not match payload length";
    return false;
  }
  out.triangles.resize(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    Triangle& t = out.triangles[i];
    for (Vertex& v : t) {
      v.position = {in.f32(), in.f32(), in.f32()};
      v.color = {in.u8(), in.u8(), in.u8()};
      if (in.u8() != 0) {
        error = "DRAW_TRIANGLES vertex pad byte is not zero";
        return false;
      }
      if (!is_finite(v.position)) {
        error = "DRAW_TRIANGLES vertex position is not finite";
        return false;
      }
    }
  }
  return true;
}

}  // namespace

Opcode opcode_of(const Command& cmd) {
  static constexpr Opcode table[] = {Opcode::begin_frame, Opcode::clear,    Opcode::set_camera, Opcode::draw_triangles,
                                     Opcode::define_list, Opcode::call_list, Opcode::barrier,   Opcode::swap,
                                     Opcode::blit_image,  Opcode::end_frame};
  return table[cmd.index()];
}

const char* opcode_name(Opcode op) {
  switch (op) {
    case Opcode::begin_frame: return "BEGIN_FRAME";
    case Opcode::clear: return "CLEAR";
    case Opcode::set_camera: return "SET_CAMERA";
    case Opcode::draw_triangles: return "DRAW_TRIANGLES";
    case Opcode::define_list: return "DEFINE_LIST";
    case Opcode::call_list: return "CALL_LIST";
    case Opcode::barrier: return "BARRIER";
    case Opcode::swap: return "SWAP";
    case Opcode::blit_image: return "BLIT_IMAGE";
    case Opcode::end_frame: return "END_FRAME";
  }
  return "?";
}

bool is_geometry(const Command& cmd) {
  return std::holds_alternative<DrawTriangles>(cmd) || std::holds_alternative<DefineList>(cmd);
}

std::size_t encoded_size(const Command& cmd) { return kHeaderBytes + payload_size(cmd); }

std::size_t encode(const Command& cmd, Bytes& out) {
  const std::size_t start = out.size();
  const std::size_t payload = payload_size(cmd);
  out.reserve(start + kHeaderBytes + payload);
  ByteWriter w(out);
  write_header(w, opcode_of(cmd), payload);
  std::visit(overloaded{
                 [&](const BeginFrame& b) {
                   w.u32(b.frame_no);
                   w.u16(b.sender_rank);
                 },
                 [&](const Clear& c) {
                   w.u8(c.color.r);
                   w.u8(c.color.g);
                   w.u8(c.color.b);
                   w.u8(c.color.a);
                   w.f32(c.depth);
                 },
                 [&](const SetCamera& s) {
                   for (float f : s.matrix.m) w.f32(f);
                 },
                 [&](const DrawTriangles& d) { write_draw(w, out, d); },
                 [&](const DefineList& l) {
                   w.u32(l.id);
                   w.u32(static_cast<std::uint32_t>(payload - 8));
                   for (const DrawTriangles& d : l.draws) {
                     write_header(w, Opcode::draw_triangles, 4 + d.triangles.size() * kWireTriangleBytes);
                     write_draw(w, out, d);
                   }
                 },
                 [&](const CallList& c) { w.u32(c.id); },
                 [&](const Barrier& b) { w.u32(b.barrier_id); },
                 [&](const Swap& s) { w.u8(s.suppress ? 1 : 0); },
                 [&](const BlitImage& b) {
                   w.u16(b.x);
                   w.u16(b.y);
                   w.u16(b.w);
                   w.u16(b.h);
                   for (const Rgba8& p : b.pixels) {
                     w.u8(p.r);
                     w.u8(p.g);
                     w.u8(p.b);
                     w.u8(p.a);
                   }
                 },
                 [&](const EndFrame& e) { w.u32(e.frame_no); },
             },
             cmd);
  return out.size() - start;
}

Bytes encode(const Command& cmd) {
  Bytes out;
  encode(cmd, out);
  return out;
}

DecodeResult decode(ByteView bytes) {
  // Header bytes are validated as far as they are present, so an invalid
  // prefix is malformed even before the frame is complete.
  if (!bytes.empty() && bytes[0] != kMagic0) return malformed("bad magic");
  if (bytes.size() > 1 && bytes[1] != kMagic1) return malformed("bad magic");
  if (bytes.size() > 2 && bytes[2] != kVersion) return malformed("unsupported version " + std::to_string(bytes[2]));
  if (bytes.size() > 3 && !known_opcode(bytes[3])) return malformed("unknown opcode " + std::to_string(bytes[3]));
  if (bytes.size() < kHeaderBytes) return {};

  ByteReader header(bytes.first(kHeaderBytes));
  header.take(3);
  const auto op = static_cast<Opcode>(header.u8());
  const std::uint32_t len = header.u32();
  if (len > kMaxPayload) return malformed("payload length exceeds limit");
  const LengthRule rule = length_rule(op);
  if (rule.exact ? len != rule.size : len < rule.size) {
    return malformed(std::string(opcode_name(op)) + " has invalid payload length " + std::to_string(len));
  }
  if (bytes.size() - kHeaderBytes < len) return {};

  const ByteView payload = bytes.subspan(kHeaderBytes, len);
  ByteReader in(payload);
  DecodeResult r;
  r.status = DecodeStatus::ok;
  r.consumed = kHeaderBytes + len;
  switch (op) {
    case Opcode::begin_frame: {
      BeginFrame b;
      b.frame_no = in.u32();
      b.sender_rank = in.u16();
      r.command = b;
      break;
    }
    case Opcode::clear: {
      Clear c;
      c.color = {in.u8(), in.u8(), in.u8(), in.u8()};
      c.depth = in.f32();
      if (!(c.depth >= 0.0f && c.depth <= 1.0f)) return malformed("CLEAR depth outside [0, 1]");
      r.command = c;
      break;
    }
    case Opcode::set_camera: {
      SetCamera s;
      for (float& f : s.matrix.m) {
        f = in.f32();
        if (!std::isfinite(f)) return malformed("SET_CAMERA matrix is not finite");
      }
      r.command = s;
      break;
    }
    case Opcode::draw_triangles: {
      DrawTriangles d;
      std::string error;
      if (!parse_draw(payload, d, error)) return malformed(error);
      r.command = std::move(d);
      break;
    }
    case Opcode::define_list: {
      DefineList l;
      l.id = in.u32();
      const std::uint32_t inner = in.u32();
      if (inner != len - 8) return malformed("DEFINE_LIST inner_length does not match payload length");
      ByteView rest = payload.subspan(8);
      while (!rest.empty()) {
        DecodeResult sub = decode(rest);
        if (sub.status != DecodeStatus::ok) return malformed("DEFINE_LIST contains an invalid inner frame");
        auto* draw = std::get_if<DrawTriangles>(&sub.command);
        if (draw == nullptr) return malformed("DEFINE_LIST may only contain DRAW_TRIANGLES");
        l.draws.push_back(std::move(*draw));
        rest = rest.subspan(sub.consumed);
      }
      r.command = std::move(l);
      break;
    }
    case Opcode::call_list: r.command = CallList{in.u32()}; break;
    case Opcode::barrier: r.command = Barrier{in.u32()}; break;
    case Opcode::swap: {
      const std::uint8_t s = in.u8();
      if (s > 1) return malformed("SWAP suppress flag must be 0 or 1");
      r.command = Swap{s == 1};
      break;
    }
    case Opcode::blit_image: {
      BlitImage b;
      b.x = in.u16();
      b.y = in.u16();
      b.w = in.u16();
      b.h = in.u16();
      const std::size_t n = static_cast<std::size_t>(b.w) * b.h;
      if (len != 8 + n * 4) return malformed("BLIT_IMAGE size does not match payload length");
      b.pixels.resize(n);
      for (Rgba8& p : b.pixels) p = {in.u8(), in.u8(), in.u8(), in.u8()};
      r.command = std::move(b);
      break;
    }
    case Opcode::end_frame: r.command = EndFrame{in.u32()}; break;
  }
  return r;
}

void StreamDecoder::feed(ByteView bytes) {
  if (offset_ > 0 && offset_ == buffer_.size()) {
    buffer_.clear();
    offset_ = 0;
  } else if (offset_ > (1u << 20) && offset_ * 2 > buffer_.size()) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(offset_));
    offset_ = 0;
  }
  buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Command> StreamDecoder::next() {
  DecodeResult r = decode(ByteView(buffer_).subspan(offset_));
  switch (r.status) {
    case DecodeStatus::ok: offset_ += r.consumed; return std::move(r.command);
    case DecodeStatus::truncated: return std::nullopt;
    case DecodeStatus::malformed: break;
  }
  throw ProtocolError("malformed command frame: " + r.error);
}

}  // namespace tw::wire
