#include "doctest.h"

#include <set>
#include <thread>

#include "support.hpp"
#include "tilewall/wire/bucket.hpp"
#include "tilewall/wire/codec.hpp"
#include "tilewall/wire/tracking.hpp"
#include "tilewall/wire/transport.hpp"

using namespace tw;
using namespace tw::wire;
using tw::testing::rand_command;
using tw::testing::rand_triangle;

namespace {

Triangle unit_triangle() { return {Vertex{{0, 0, 0}, {1, 2, 3}}, Vertex{{1, 0, 0}, {}}, Vertex{{0, 1, 0}, {}}}; }

Command decoded(const Bytes& b) {
  const DecodeResult r = decode(b);
  REQUIRE(r.status == DecodeStatus::ok);
  REQUIRE(r.consumed == b.size());
  return r.command;
}

}  // namespace

TEST_CASE("command frame layout") {
  const Bytes call = encode(CallList{7});
  CHECK(call.size() == 12);
  CHECK(call == Bytes{0x43, 0x57, 1, 0x15, 4, 0, 0, 0, 7, 0, 0, 0});

  DrawTriangles one;
  one.triangles.push_back(unit_triangle());
  CHECK(encode(one).size() == kHeaderBytes + 4 + 48);

  DefineList list{1, {}};
  DrawTriangles hundred;
  for (int i = 0; i < 100; ++i) hundred.triangles.push_back(unit_triangle());
  list.draws.push_back(hundred);
  // header + id + inner_length + one inner DRAW_TRIANGLES frame
  CHECK(encode(list).size() == 8 + 4 + 4 + (8 + 4 + 4800));
  CHECK(encode(list).size() == 4828);

  CHECK(encode(BeginFrame{3, 2}).size() == 14);
  CHECK(encode(Clear{}).size() == 16);
  CHECK(encode(SetCamera{}).size() == 72);
  CHECK(encode(Barrier{1}).size() == 12);
  CHECK(encode(Swap{true}).size() == 9);
  CHECK(encode(EndFrame{1}).size() == 12);
  CHECK(encode(BlitImage{0, 0, 2, 3, std::vector<Rgba8>(6)}).size() == 8 + 8 + 24);
}

TEST_CASE("command round trip over random commands") {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 5000; ++i) {
    const Command c = rand_command(rng);
    const Bytes b = encode(c);
    CHECK(b.size() == encoded_size(c));
    CHECK(decoded(b) == c);
  }
}

TEST_CASE("decode classifies every input") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const Bytes frame = encode(rand_command(rng));
    // Every proper prefix is truncated.
    for (std::size_t n = 0; n < frame.size(); n += 1 + n / 8) CHECK(decode(ByteView(frame).first(n)).status == DecodeStatus::truncated);
    // Trailing bytes are never looked at.
    Bytes longer = frame;
    for (int k = 0; k < 5; ++k) longer.push_back(static_cast<std::uint8_t>(rng()));
    const DecodeResult r = decode(longer);
    REQUIRE(r.status == DecodeStatus::ok);
    CHECK(r.consumed == frame.size());
  }

  // Mutated frames and random bytes: exactly one classification, and ok only
  // with a consumed length inside the input.
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 20000; ++i) {
    Bytes b;
    if (i % 2 == 0) {
      b = encode(rand_command(rng));
      const std::size_t flips = 1 + rng() % 3;
      for (std::size_t k = 0; k < flips; ++k) b[rng() % b.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      b.resize(rng() % (b.size() + 1));
    } else {
      b.resize(rng() % 40);
      for (auto& x : b) x = static_cast<std::uint8_t>(rng());
      if (b.size() > 4 && rng() % 2 == 0) {
        b[0] = kMagic0;
        b[1] = kMagic1;
        b[2] = kVersion;
        b[3] = static_cast<std::uint8_t>(0x10 + rng() % 10);
      }
    }
    const DecodeResult r = decode(b);
    ++counts[static_cast<int>(r.status)];
    if (r.status == DecodeStatus::ok) {
      CHECK(r.consumed <= b.size());
      CHECK(r.consumed >= kHeaderBytes);
      // A valid frame re-encodes to the same bytes.
      CHECK(encode(r.command) == Bytes(b.begin(), b.begin() + static_cast<std::ptrdiff_t>(r.consumed)));
    } else {
      CHECK(r.consumed == 0);
    }
    if (r.status == DecodeStatus::malformed) CHECK_FALSE(r.error.empty());
  }
  CHECK(counts[0] > 0);
  CHECK(counts[1] > 0);
  CHECK(counts[2] > 0);
}

TEST_CASE("specific malformed frames") {
  CHECK(decode(Bytes{0x44}).status == DecodeStatus::malformed);
  CHECK(decode(Bytes{0x43, 0x57, 2}).status == DecodeStatus::malformed);
  CHECK(decode(Bytes{0x43, 0x57, 1, 0x20}).status == DecodeStatus::malformed);
  Bytes call = encode(CallList{7});
  call[4] = 5;  // CALL_LIST payload must be 4
  CHECK(decode(call).status == DecodeStatus::malformed);
  Bytes swap = encode(Swap{false});
  swap[8] = 2;
  CHECK(decode(swap).status == DecodeStatus::malformed);
  DefineList l{3, {DrawTriangles{}}};
  Bytes def = encode(l);
  def[12] ^= 1;  // inner_length
  CHECK(decode(def).status == DecodeStatus::malformed);
  // DEFINE_LIST holding something other than DRAW_TRIANGLES.
  Bytes nested = encode(DefineList{3, {}});
  const Bytes inner = encode(Barrier{1});
  nested.insert(nested.end(), inner.begin(), inner.end());
  nested[4] = static_cast<std::uint8_t>(8 + inner.size());
  nested[12] = static_cast<std::uint8_t>(inner.size());
  CHECK(decode(nested).status == DecodeStatus::malformed);
}

TEST_CASE("stream decoder across arbitrary splits") {
  std::mt19937_64 rng(3);
  std::vector<Command> cmds;
  Bytes stream;
  for (int i = 0; i < 300; ++i) {
    cmds.push_back(rand_command(rng));
    encode(cmds.back(), stream);
  }
  StreamDecoder dec;
  std::vector<Command> out;
  std::size_t pos = 0;
  while (pos < stream.size()) {
    const std::size_t n = std::min(stream.size() - pos, 1 + static_cast<std::size_t>(rng() % 200));
    dec.feed(ByteView(stream).subspan(pos, n));
    pos += n;
    while (auto c = dec.next()) out.push_back(std::move(*c));
  }
  CHECK(out == cmds);
  CHECK(dec.buffered() == 0);
  dec.feed(Bytes{0x43, 0x58});
  CHECK_THROWS_AS(dec.next(), ProtocolError);
}

TEST_CASE("bucket examples") {
  const TileGrid g{2, 2, 100, 100};
  CHECK(bucket(ScreenAabb{10, 10, 50, 50}, g) == std::vector<TileId>{{0, 0}});
  CHECK(bucket(ScreenAabb{-10, -10, 300, 300}, g).size() == 4);
  CHECK(bucket(ScreenAabb{150, 20, 160, 30}, g) == std::vector<TileId>{{0, 1}});
  CHECK(bucket(std::nullopt, g).empty());
  CHECK(bucket(ScreenAabb{-50, -50, -10, -10}, g).empty());
  CHECK(bucket(ScreenAabb{250, 10, 300, 20}, g).empty());
}

TEST_CASE("bucket covers every tile rasterization touches") {
  std::mt19937_64 rng(4);
  const TileGrid g{2, 2, 64, 48};
  const int w = g.mural_w();
  const int h = g.mural_h();
  CameraState cam;
  const Mat4 m = camera_matrix(cam, w, h);
  int checked = 0;
  int multi = 0;
  for (int i = 0; i < 500; ++i) {
    Triangle t = rand_triangle(rng, 1.0f);
    if (i % 2 == 0) {
      // Small triangles near tile boundaries.
      const Vec3 c{tw::testing::rand_float(rng, -0.2f, 0.2f), tw::testing::rand_float(rng, -0.2f, 0.2f), 0};
      for (Vertex& v : t) v.position = c + v.position * 0.05f;
    }
    const auto s = project_triangle(m, t, w, h);
    const auto bounds = s ? std::optional<ScreenAabb>(screen_bounds(*s)) : std::nullopt;
    const std::vector<TileId> b = bucket(bounds, g);
    const std::set<TileId> claimed(b.begin(), b.end());
    Framebuffer fb(w, h);
    if (s) rasterize_triangle(fb, *s, fb.area());
    std::set<TileId> touched;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (fb.depth_at(x, y) != 1.0f) touched.insert({y / g.tile_h, x / g.tile_w});
      }
    }
    for (const TileId& id : touched) CHECK(claimed.contains(id));
    checked += s ? 1 : 0;
    multi += touched.size() > 1 ? 1 : 0;
  }
  CHECK(checked > 300);
  CHECK(multi > 20);
}

TEST_CASE("state tracking examples") {
  ServerStateMirror m;
  SetCamera a;
  a.matrix = Mat4::identity();
  SetCamera b;
  b.matrix = Mat4::identity();
  b.matrix.at(0, 3) = 2.0f;
  CHECK(track(a, m) == TrackDecision::send);
  CHECK(track(a, m) == TrackDecision::suppress);
  CHECK(track(b, m) == TrackDecision::send);
  CHECK(track(Clear{}, m) == TrackDecision::send);
  CHECK(track(Clear{}, m) == TrackDecision::suppress);
  CHECK(track(BeginFrame{1, 0}, m) == TrackDecision::send);
  CHECK(track(Clear{}, m) == TrackDecision::send);
  CHECK(track(DefineList{4, {}}, m) == TrackDecision::send);
  CHECK(track(DefineList{4, {}}, m) == TrackDecision::suppress);
  for (int i = 0; i < 3; ++i) {
    CHECK(track(DrawTriangles{}, m) == TrackDecision::send);
    CHECK(track(Barrier{1}, m) == TrackDecision::send);
    CHECK(track(Swap{true}, m) == TrackDecision::send);
    CHECK(track(CallList{4}, m) == TrackDecision::send);
  }
}

TEST_CASE("replaying only the sent commands gives the same mirror") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    // Small alphabets so repeats are frequent.
    std::vector<Command> seq;
    for (int i = 0; i < 60; ++i) {
      switch (rng() % 6) {
        case 0: {
          SetCamera s;
          s.matrix.m[0] = static_cast<float>(rng() % 3);
          seq.push_back(s);
          break;
        }
        case 1: seq.push_back(Clear{{0, 0, 0, static_cast<std::uint8_t>(rng() % 2)}, 1.0f}); break;
        case 2: seq.push_back(DefineList{static_cast<std::uint32_t>(rng() % 4), {}}); break;
        case 3: seq.push_back(BeginFrame{static_cast<std::uint32_t>(i), 0}); break;
        default: seq.push_back(rand_command(rng)); break;
      }
    }
    ServerStateMirror sender;
    ServerStateMirror everything;
    ServerStateMirror sent_only;
    for (const Command& c : seq) {
      apply(c, everything);
      if (track(c, sender) == TrackDecision::send) apply(c, sent_only);
    }
    CHECK(sent_only == everything);
    CHECK(sender == everything);
  }
}

TEST_CASE("display list store") {
  ListStore store;
  DrawTriangles d;
  d.triangles.push_back(unit_triangle());
  store.define(DisplayList{1, {d}});
  CHECK(store.contains(1));
  CHECK(store.call(1).draws.size() == 1);
  CHECK_NOTHROW(store.define(DisplayList{1, {d}}));
  CHECK_THROWS_AS(store.define(DisplayList{1, {}}), ProtocolError);
  CHECK_THROWS_AS(store.call(99), ProtocolError);
  CHECK(store.ids() == std::set<std::uint32_t>{1});
}

TEST_CASE("throttle schedule arithmetic") {
  const auto t0 = Clock::now();
  ThrottledLink link({1e8, 0.0, 1.0});
  const auto slot = link.reserve(16u << 20, t0);
  CHECK(std::chrono::duration<double>(slot.delivered - t0).count() >= 1.342);
  CHECK(std::chrono::duration<double>(slot.delivered - t0).count() == doctest::Approx(16.0 * 1048576 * 8 / 1e8));

  ThrottledLink lat({1e8, 0.005, 1.0});
  const auto empty = lat.reserve(0, t0);
  CHECK(std::chrono::duration<double>(empty.delivered - t0).count() == doctest::Approx(0.005));

  // Calibrated efficiency: 16 MiB at 100 Mbit in 1.75 s.
  ThrottledLink cal({1e8, 0.0, 0.767});
  const auto slow = cal.reserve(16u << 20, t0);
  CHECK(std::chrono::duration<double>(slow.delivered - t0).count() == doctest::Approx(1.75).epsilon(0.002));

  // Transmissions on one medium serialize.
  ThrottledLink shared({1e8, 0.0, 1.0});
  const auto a = shared.reserve(1000000, t0);
  const auto b = shared.reserve(1000000, t0);
  CHECK(b.start == a.delivered);

  CHECK_THROWS_AS(ThrottledLink({0.0, 0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ThrottledLink({1e8, -1.0, 1.0}), std::invalid_argument);
}

TEST_CASE("throttled pipe delivery time is within 10% of the model") {
  for (std::size_t n : {std::size_t{1} << 20, std::size_t{2} << 20}) {
    auto link = std::make_shared<ThrottledLink>(ThrottleSpec{1e8, 0.0, 1.0});
    auto [sink, source] = make_pipe(link);
    const Bytes payload(n, 0x5a);
    const auto t0 = Clock::now();
    std::thread sender([&] {
      // Sent in 64 KiB pieces as the app nodes do.
      for (std::size_t off = 0; off < n; off += 65536) sink->send(ByteView(payload).subspan(off, std::min<std::size_t>(65536, n - off)));
      sink->close();
    });
    std::vector<std::uint8_t> buf(1 << 16);
    std::size_t got = 0;
    bool intact = true;
    for (std::size_t k; (k = source->receive(buf)) > 0;) {
      for (std::size_t i = 0; i < k; ++i) intact = intact && buf[i] == 0x5a;
      got += k;
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
    sender.join();
    const double model = 8.0 * static_cast<double>(n) / 1e8;
    CHECK(got == n);
    CHECK(intact);
    MESSAGE(n << " bytes: " << elapsed << " s, model " << model << " s");
    CHECK(elapsed >= model * 0.99);
    CHECK(elapsed <= model * 1.10);
  }
}

TEST_CASE("pipe order and closing") {
  auto [sink, source] = make_pipe();
  for (std::uint8_t i = 0; i < 10; ++i) sink->send(Bytes{i, static_cast<std::uint8_t>(i + 1)});
  sink->close();
  Bytes all;
  std::uint8_t buf[3];
  for (std::size_t k; (k = source->receive(buf)) > 0;) all.insert(all.end(), buf, buf + k);
  REQUIRE(all.size() == 20);
  for (std::uint8_t i = 0; i < 10; ++i) CHECK(all[2 * i] == i);
  CHECK_THROWS_AS(sink->send(Bytes{1}), ChannelClosed);

  auto [s2, r2] = make_pipe();
  r2->close();
  CHECK_THROWS_AS(s2->send(Bytes{1}), ChannelClosed);
}

TEST_CASE("tcp loopback stream") {
  TcpListener listener("127.0.0.1:0");
  REQUIRE(listener.port() != 0);
  auto client = TcpStream::connect("127.0.0.1:" + std::to_string(listener.port()));
  auto server = listener.accept();
  REQUIRE(server);
  Bytes big(300000);
  for (std::size_t i = 0; i < big.size(); ++i) big[i] = static_cast<std::uint8_t>(i * 7);
  std::thread t([&] {
    client->send(big);
    client->close();
  });
  Bytes got;
  std::uint8_t buf[4096];
  for (std::size_t k; (k = server->receive(buf)) > 0;) got.insert(got.end(), buf, buf + k);
  t.join();
  CHECK(got == big);
}

TEST_CASE("host:port parsing") {
  const HostPort hp = parse_host_port("10.0.0.2:7400");
  CHECK(hp.host == "10.0.0.2");
  CHECK(hp.port == 7400);
  CHECK_THROWS_AS(parse_host_port("nohost"), std::invalid_argument);
  CHECK_THROWS_AS(parse_host_port("h:99999"), std::invalid_argument);
  CHECK_THROWS_AS(parse_host_port("h:"), std::invalid_argument);
}
