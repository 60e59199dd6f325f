#include "tilewall/cluster/tile_server.hpp"

#include <algorithm>
#include <sstream>


namespace tw::cluster {

using wire::ProtocolError;

bool BarrierEpoch::arrive(std::uint32_t rank) {
  if (rank >= size_) throw ProtocolError("barrier arrival from out-of-range rank " + std::to_string(rank));
  if (!arrivals_.insert(rank).second) {
    throw ProtocolError("rank " + std::to_string(rank) + " arrived twice at barrier " + std::to_string(barrier_id_));
  }
  return released();
}

TileServer::TileServer(TileServerConfig config, PresentFn on_present)
    : config_(config), on_present_(std::move(on_present)), senders_(config.n_senders),
      pending_clears_(config.n_senders) {
  if (config_.n_senders == 0) throw std::invalid_argument("tile server needs at least one sender");
  if (config_.viewport.empty()) throw std::invalid_argument("tile server viewport is empty");
  image_ = Framebuffer(config_.viewport);
  owner_.assign(image_.color().size(), 0);
}

void TileServer::on_command(std::uint32_t sender, wire::Command cmd, wire::Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (sender >= senders_.size()) throw ProtocolError("command from unknown sender " + std::to_string(sender));
  Sender& s = senders_[sender];
  if (s.skipping) {
    if (!std::holds_alternative<wire::BeginFrame>(cmd)) return;
    s.skipping = false;
  }
  if (s.blocked) {
    s.pending.push_back(std::move(cmd));
    return;
  }
  try {
    execute(sender, cmd, now);
    drain();
  } catch (const ProtocolError&) {
    abort_frame();
    throw;
  }
}

void TileServer::drain() {
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::uint32_t r = 0; r < senders_.size(); ++r) {
      Sender& s = senders_[r];
      while (!s.blocked && !s.pending.empty()) {
        wire::Command cmd = std::move(s.pending.front());
        s.pending.pop_front();
        execute(r, cmd, wire::Clock::now());
        progress = true;
      }
    }
  }
}

void TileServer::execute(std::uint32_t sender, wire::Command& cmd, wire::Clock::time_point now) {
  Sender& s = senders_[sender];
  if (!frame_started_) frame_started_ = now;

  if (const auto* begin = std::get_if<wire::BeginFrame>(&cmd)) {
    if (begin->sender_rank != sender) {
      throw ProtocolError("BEGIN_FRAME claims rank " + std::to_string(begin->sender_rank) + " on the connection of rank " +
                          std::to_string(sender));
    }
    frame_no_ = begin->frame_no;
  } else if (const auto* clear = std::get_if<wire::Clear>(&cmd)) {
    pending_clears_[sender] = *clear;
  } else if (const auto* barrier = std::get_if<wire::Barrier>(&cmd)) {
    if (!barrier_) barrier_.emplace(barrier->barrier_id, config_.n_senders);
    if (barrier_->barrier_id() != barrier->barrier_id) {
      throw ProtocolError("rank " + std::to_string(sender) + " waits at barrier " + std::to_string(barrier->barrier_id) +
                          " while barrier " + std::to_string(barrier_->barrier_id()) + " is open");
    }
    note(ServerLogEntry::Kind::arrive, sender);
    if (barrier_->arrive(sender)) {
      release_barrier();
    } else {
      s.blocked = true;
    }
  } else if (const auto* camera = std::get_if<wire::SetCamera>(&cmd)) {
    s.camera = camera->matrix;
  } else if (const auto* draw = std::get_if<wire::DrawTriangles>(&cmd)) {
    if (!s.camera) throw ProtocolError("DRAW_TRIANGLES before SET_CAMERA");
    note(ServerLogEntry::Kind::draw, sender);
    const RankPlane ranks{owner_, sender};
    draw_triangles(image_, *s.camera, draw->triangles, config_.mural_w, config_.mural_h, config_.viewport, &ranks);
  } else if (auto* define = std::get_if<wire::DefineList>(&cmd)) {
    s.lists.define(std::move(*define));
  } else if (const auto* call = std::get_if<wire::CallList>(&cmd)) {
    const wire::DisplayList& list = s.lists.call(call->id);
    if (!s.camera) throw ProtocolError("CALL_LIST before SET_CAMERA");
    note(ServerLogEntry::Kind::draw, sender);
    const RankPlane ranks{owner_, sender};
    for (const wire::DrawTriangles& d : list.draws) {
      draw_triangles(image_, *s.camera, d.triangles, config_.mural_w, config_.mural_h, config_.viewport, &ranks);
    }
  } else if (const auto* blit = std::get_if<wire::BlitImage>(&cmd)) {
    note(ServerLogEntry::Kind::draw, sender);
    const PixelRect src{blit->x, blit->y, blit->w, blit->h};
    const PixelRect clip = src.intersect(config_.viewport);
    for (int y = clip.y; y < clip.y + clip.h; ++y) {
      for (int x = clip.x; x < clip.x + clip.w; ++x) {
        const auto i = static_cast<std::size_t>(y - src.y) * src.w + static_cast<std::size_t>(x - src.x);
        // A blit overwrites the sender's own depth-0 fragments too.
        const std::size_t p = image_.index(x, y);
        if (image_.depth()[p] > 0.0f || owner_[p] >= sender) {
          image_.set(x, y, blit->pixels[i], 0.0f);
          owner_[p] = sender;
        }
      }
    }
  } else if (const auto* swap = std::get_if<wire::Swap>(&cmd)) {
    if (s.swapped) throw ProtocolError("rank " + std::to_string(sender) + " sent a second SWAP in one frame");
    s.swapped = true;
    ++swaps_;
    if (!swap->suppress) ++authoritative_swaps_;
    if (config_.record_log) log_.push_back({ServerLogEntry::Kind::swap, epoch_, sender, !swap->suppress});
    if (swaps_ == senders_.size()) present();
  }
  // END_FRAME carries no server-side effect.
}

void TileServer::release_barrier() {
  note(ServerLogEntry::Kind::release, barrier_->barrier_id());
  for (std::uint32_t r = 0; r < pending_clears_.size(); ++r) {
    if (!pending_clears_[r]) continue;
    image_.clear(pending_clears_[r]->color, pending_clears_[r]->depth);
    std::fill(owner_.begin(), owner_.end(), 0u);
    note(ServerLogEntry::Kind::clear, r);
    pending_clears_[r].reset();
  }
  barrier_.reset();
  ++epoch_;
  for (Sender& s : senders_) s.blocked = false;
}

void TileServer::present() {
  if (authoritative_swaps_ != 1) {
    throw ProtocolError("frame " + std::to_string(frame_no_) + " has " + std::to_string(authoritative_swaps_) +
                        " non-suppressed SWAPs; exactly one is required");
  }
  PresentedFrame frame{++presented_, frame_no_, image_};
  note(ServerLogEntry::Kind::present, 0);

  swaps_ = 0;
  authoritative_swaps_ = 0;
  for (Sender& s : senders_) s.swapped = false;
  frame_started_.reset();
  watchdog_fired_ = false;
  if (on_present_) on_present_(frame);
}

void TileServer::abort_frame() {
  ++aborted_;
  for (Sender& s : senders_) {
    s.pending.clear();
    s.blocked = false;
    s.swapped = false;
    s.skipping = true;
  }
  barrier_.reset();
  for (auto& c : pending_clears_) c.reset();
  swaps_ = 0;
  authoritative_swaps_ = 0;
  frame_started_.reset();
  watchdog_fired_ = false;
}

void TileServer::note(ServerLogEntry::Kind kind, std::uint32_t sender) {
  if (config_.record_log) log_.push_back({kind, epoch_, sender});
}

std::optional<std::string> TileServer::check_watchdog(wire::Clock::time_point now) {
  std::lock_guard lock(mu_);
  if (!frame_started_ || watchdog_fired_ || now - *frame_started_ < config_.watchdog) return std::nullopt;
  watchdog_fired_ = true;
  std::ostringstream msg;
  msg << "watchdog: frame " << frame_no_ << " not presented after "
      << std::chrono::duration<double>(now - *frame_started_).count() << " s; no SWAP from rank(s)";
  for (std::uint32_t r = 0; r < senders_.size(); ++r) {
    if (!senders_[r].swapped) msg << ' ' << r;
  }
  return msg.str();
}

std::uint64_t TileServer::presentations() const {
  std::lock_guard lock(mu_);
  return presented_;
}

std::uint64_t TileServer::aborted_frames() const {
  std::lock_guard lock(mu_);
  return aborted_;
}

std::set<std::uint32_t> TileServer::defined_lists(std::uint32_t sender) const {
  std::lock_guard lock(mu_);
  return senders_.at(sender).lists.ids();
}

std::vector<ServerLogEntry> TileServer::log() const {
  std::lock_guard lock(mu_);
  return log_;
}

TileServerHost::TileServerHost(std::unique_ptr<TileServer> server,
                               std::vector<std::unique_ptr<wire::ByteSource>> connections, DiagnosticFn on_diagnostic)
    : server_(std::move(server)), connections_(std::move(connections)), on_diagnostic_(std::move(on_diagnostic)),
      open_(connections_.size()) {
  for (std::uint32_t r = 0; r < connections_.size(); ++r) readers_.emplace_back([this, r] { read_loop(r); });
  watchdog_ = std::thread([this] {
    const auto period = std::clamp<std::chrono::milliseconds>(server_->config().watchdog / 4,
                                                              std::chrono::milliseconds(5), std::chrono::milliseconds(500));
    std::unique_lock lock(mu_);
    while (open_ > 0) {
      cv_.wait_for(lock, period);
      lock.unlock();
      if (auto msg = server_->check_watchdog(); msg && on_diagnostic_) on_diagnostic_(*msg);
      lock.lock();
    }
  });
}

TileServerHost::~TileServerHost() {
  for (auto& c : connections_) c->close();
  join();
}

void TileServerHost::join() {
  for (auto& t : readers_) {
    if (t.joinable()) t.join();
  }
  if (watchdog_.joinable()) watchdog_.join();
}

void TileServerHost::read_loop(std::uint32_t sender) {
  wire::StreamDecoder decoder;
  std::vector<std::uint8_t> buf(1 << 16);
  try {
    for (;;) {
      const std::size_t n = connections_[sender]->receive(buf);
      if (n == 0) break;
      decoder.feed(std::span(buf).first(n));
      for (;;) {
        std::optional<wire::Command> cmd = decoder.next();
        if (!cmd) break;
        try {
          server_->on_command(sender, std::move(*cmd));
        } catch (const ProtocolError& e) {
          if (on_diagnostic_) on_diagnostic_("rank " + std::to_string(sender) + ": frame aborted: " + e.what());
        }
      }
    }
  } catch (const ProtocolError& e) {
    // Undecodable stream: there is no resynchronization, the connection is dropped.
    if (on_diagnostic_) on_diagnostic_("rank " + std::to_string(sender) + ": " + e.what());
    connections_[sender]->close();
  }
  std::lock_guard lock(mu_);
  --open_;
  cv_.notify_all();
}

}  // namespace tw::cluster
