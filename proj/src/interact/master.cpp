#include "tilewall/interact/master.hpp"

namespace tw::interact {

std::vector<EventMsg> coalesce_moves(std::span<const EventMsg> burst) {
  std::vector<EventMsg> out;
  out.reserve(burst.size());
  for (const EventMsg& e : burst) {
    if (e.kind == EventKind::pointer_move && !out.empty() && out.back().kind == EventKind::pointer_move &&
        out.back().button == e.button) {
      out.back() = e;
    } else {
      out.push_back(e);
    }
  }
  return out;
}

Master::Master(std::vector<std::unique_ptr<wire::ByteSink>> slaves, InteractionSession session, MasterOptions options)
    : session_(std::move(session)), options_(options) {
  if (options_.queue_capacity == 0) throw std::invalid_argument("master queue capacity must be positive");
  if (session_.last_seq()) seq_ = *session_.last_seq();
  for (auto& sink : slaves) {
    auto link = std::make_unique<Link>();
    link->sink = std::move(sink);
    links_.push_back(std::move(link));
  }
  for (auto& link : links_) link->thread = std::thread([this, l = link.get()] { run_link(*l); });
}

Master::~Master() { close(); }

ApplyResult Master::post(EventMsg e) { return broadcast(e); }

ApplyResult Master::post_burst(std::span<const EventMsg> burst) {
  const std::vector<EventMsg> events = options_.coalesce_moves ? coalesce_moves(burst)
                                                               : std::vector<EventMsg>(burst.begin(), burst.end());
  ApplyResult all;
  for (const EventMsg& e : events) {
    const ApplyResult r = broadcast(e);
    all.camera_changed |= r.camera_changed;
    all.flags_changed |= r.flags_changed;
    all.quit |= r.quit;
  }
  return all;
}

ApplyResult Master::broadcast(EventMsg e) {
  e.seq = ++seq_;
  auto bytes = std::make_shared<const Bytes>(encode_event(e));
  // The master's own replica consumes the broadcast bytes, not the struct.
  const EventDecodeResult decoded = decode_event(*bytes);
  if (decoded.status != wire::DecodeStatus::ok) throw ProtocolError("cannot broadcast event: " + decoded.error);
  {
    std::unique_lock lock(mu_);
    if (closing_) throw wire::ChannelClosed("master is closed");
    space_cv_.wait(lock, [&] {
      for (const auto& l : links_) {
        if (!l->status.failed && l->queue.size() >= options_.queue_capacity) return false;
      }
      return true;
    });
    for (auto& l : links_) {
      if (!l->status.failed) l->queue.push_back(bytes);
    }
  }
  work_cv_.notify_all();
  return session_.apply(decoded.event);
}

void Master::run_link(Link& link) {
  Bytes batch;
  for (;;) {
    std::size_t count = 0;
    {
      std::unique_lock lock(mu_);
      work_cv_.wait(lock, [&] { return !link.queue.empty() || closing_; });
      if (link.queue.empty()) break;
      batch.clear();
      while (!link.queue.empty()) {
        batch.insert(batch.end(), link.queue.front()->begin(), link.queue.front()->end());
        link.queue.pop_front();
        ++count;
      }
    }
    space_cv_.notify_all();
    try {
      link.sink->send(batch);
      std::lock_guard lock(mu_);
      link.status.events_sent += count;
      link.status.bytes_sent += batch.size();
    } catch (const std::exception& e) {
      std::lock_guard lock(mu_);
      link.status.failed = true;
      link.status.error = e.what();
      link.queue.clear();
      space_cv_.notify_all();
      break;
    }
  }
  try {
    link.sink->close();
  } catch (const std::exception&) {
  }
}

void Master::close() {
  {
    std::lock_guard lock(mu_);
    if (closed_) return;
    closed_ = true;
    closing_ = true;
  }
  work_cv_.notify_all();
  for (auto& l : links_) {
    if (l->thread.joinable()) l->thread.join();
  }
}

std::vector<SlaveLinkStatus> Master::status() const {
  std::lock_guard lock(mu_);
  std::vector<SlaveLinkStatus> out;
  for (const auto& l : links_) out.push_back(l->status);
  return out;
}

SlaveReport slave_loop(InteractionSession& session, wire::ByteSource& in, const FrameFn& on_frame) {
  SlaveReport report;
  EventStreamDecoder decoder;
  std::vector<std::uint8_t> buf(1 << 14);
  try {
    for (;;) {
      const std::size_t n = in.receive(buf);
      if (n == 0) {
        report.diagnostic = "event channel closed before QUIT";
        return report;
      }
      decoder.feed(std::span(buf).first(n));
      while (auto e = decoder.next()) {
        const ApplyResult r = session.apply(*e);
        ++report.events;
        if (r.quit) {
          report.quit = true;
          return report;
        }
        if (r.redraw()) {
          if (on_frame) on_frame(session);
          ++report.frames;
        }
      }
    }
  } catch (const std::exception& e) {
    report.diagnostic = e.what();
  }
  return report;
}

}  // namespace tw::interact
