#include "tilewall/interact/ui_push.hpp"

#include <cmath>

#include "tilewall/interact/event.hpp"

namespace tw::interact {

using wire::DecodeStatus;

Bytes rle_encode(const Framebuffer& fb) {
  Bytes out;
  ByteWriter w(out);
  const auto px = fb.color();
  for (int y = 0; y < fb.height(); ++y) {
    const Rgba8* row = px.data() + static_cast<std::size_t>(y) * fb.width();
    int x = 0;
    while (x < fb.width()) {
      int run = 1;
      while (x + run < fb.width() && run < 0xFFFF && row[x + run] == row[x]) ++run;
      w.u16(static_cast<std::uint16_t>(run));
      w.u8(row[x].r);
      w.u8(row[x].g);
      w.u8(row[x].b);
      w.u8(row[x].a);
      x += run;
    }
  }
  return out;
}

std::vector<Rgba8> rle_decode(ByteView rle, int w, int h) {
  std::vector<Rgba8> out;
  out.reserve(static_cast<std::size_t>(w) * h);
  ByteReader in(rle);
  for (int y = 0; y < h; ++y) {
    int x = 0;
    while (x < w) {
      const int run = in.u16();
      const Rgba8 c{in.u8(), in.u8(), in.u8(), in.u8()};
      if (!in.ok()) throw ProtocolError("RLE frame truncated");
      if (run == 0 || x + run > w) throw ProtocolError("RLE run crosses a row boundary");
      out.insert(out.end(), static_cast<std::size_t>(run), c);
      x += run;
    }
  }
  if (in.remaining() != 0) throw ProtocolError("RLE frame has trailing bytes");
  return out;
}

UiFrame make_ui_frame(std::uint32_t frame_no, const Framebuffer& fb) {
  return {frame_no, static_cast<std::uint16_t>(fb.width()), static_cast<std::uint16_t>(fb.height()), rle_encode(fb)};
}

Bytes encode_ui(const UiMessage& msg) {
  Bytes out;
  ByteWriter w(out);
  w.u8(kEventMagic0);
  w.u8(kEventMagic1);
  w.u8(kEventVersion);
  w.u8(static_cast<std::uint8_t>(UiKind::hello) + static_cast<std::uint8_t>(msg.index()));
  const std::size_t len_at = w.placeholder_u32();
  if (const auto* h = std::get_if<UiHello>(&msg)) {
    w.u32(h->session_id);
    w.u16(h->mural_w);
    w.u16(h->mural_h);
    w.u8(h->mode);
    w.u8(h->caching ? 1 : 0);
  } else if (const auto* f = std::get_if<UiFrame>(&msg)) {
    w.u32(f->frame_no);
    w.u16(f->w);
    w.u16(f->h);
    w.bytes(f->rle);
  } else if (const auto* s = std::get_if<UiStats>(&msg)) {
    w.f32(s->fps);
    w.u16(static_cast<std::uint16_t>(s->bytes_per_link.size()));
    for (std::uint64_t b : s->bytes_per_link) w.u64(b);
  }
  w.patch_u32(len_at, static_cast<std::uint32_t>(out.size() - kUiHeaderBytes));
  return out;
}

namespace {

UiDecodeResult malformed(std::string why) {
  UiDecodeResult r;
  r.status = DecodeStatus::malformed;
  r.error = std::move(why);
  return r;
}

}  // namespace

UiDecodeResult decode_ui(ByteView bytes) {
  if (!bytes.empty() && bytes[0] != kEventMagic0) return malformed("bad magic");
  if (bytes.size() > 1 && bytes[1] != kEventMagic1) return malformed("bad magic");
  if (bytes.size() > 2 && bytes[2] != kEventVersion) return malformed("unsupported version");
  if (bytes.size() > 3 && (bytes[3] < 0x20 || bytes[3] > 0x22)) return malformed("unknown message kind");
  if (bytes.size() < kUiHeaderBytes) return {};
  ByteReader header(bytes.first(kUiHeaderBytes));
  header.take(3);
  const auto kind = static_cast<UiKind>(header.u8());
  const std::uint32_t len = header.u32();
  if (len > wire::kMaxPayload) return malformed("payload length exceeds limit");
  if (bytes.size() - kUiHeaderBytes < len) return {};

  ByteReader in(bytes.subspan(kUiHeaderBytes, len));
  UiDecodeResult r;
  switch (kind) {
    case UiKind::hello: {
      if (len != 10) return malformed("hello has invalid payload length");
      UiHello h;
      h.session_id = in.u32();
      h.mural_w = in.u16();
      h.mural_h = in.u16();
      h.mode = in.u8();
      const std::uint8_t caching = in.u8();
      if (caching > 1) return malformed("hello caching flag must be 0 or 1");
      h.caching = caching == 1;
      r.message = h;
      break;
    }
    case UiKind::frame: {
      if (len < 8) return malformed("frame has invalid payload length");
      UiFrame f;
      f.frame_no = in.u32();
      f.w = in.u16();
      f.h = in.u16();
      const ByteView rle = in.take(len - 8);
      f.rle.assign(rle.begin(), rle.end());
      r.message = std::move(f);
      break;
    }
    case UiKind::stats: {
      if (len < 6) return malformed("stats has invalid payload length");
      UiStats s;
      s.fps = in.f32();
      const std::uint16_t links = in.u16();
      if (len != 6u + 8u * links) return malformed("stats link count does not match payload length");
      for (std::uint16_t i = 0; i < links; ++i) s.bytes_per_link.push_back(in.u64());
      r.message = std::move(s);
      break;
    }
  }
  r.status = DecodeStatus::ok;
  r.consumed = kUiHeaderBytes + len;
  return r;
}

}  // namespace tw::interact
