#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "tilewall/interact/event.hpp"
#include "tilewall/interact/session.hpp"
#include "tilewall/wire/transport.hpp"

namespace tw::interact {

struct MasterOptions {
  /// Merge runs of consecutive POINTER_MOVE (same button) inside one burst
  /// into the last of the run before broadcasting.
  bool coalesce_moves = false;
  /// Per-slave queue bound in events; a full queue blocks the producer.
  std::size_t queue_capacity = 4096;
};

struct SlaveLinkStatus {
  bool failed = false;
  std::string error;
  std::uint64_t events_sent = 0;
  std::uint64_t bytes_sent = 0;
};

/// Runs of consecutive same-button POINTER_MOVE events reduced to their last event.
std::vector<EventMsg> coalesce_moves(std::span<const EventMsg> burst);

/// Broadcasts input events to every slave and applies them to its own session
/// from the very bytes it sent. One sender thread per slave drains a bounded
/// FIFO; a slave whose channel fails is marked failed and the others carry on.
class Master {
 public:
  Master(std::vector<std::unique_ptr<wire::ByteSink>> slaves, InteractionSession session, MasterOptions options = {});
  ~Master();
  Master(const Master&) = delete;
  Master& operator=(const Master&) = delete;

  /// Assigns the next seq, broadcasts and applies. The incoming seq is ignored.
  ApplyResult post(EventMsg e);
  /// Same for a burst, coalescing first when enabled. Results are OR-ed.
  ApplyResult post_burst(std::span<const EventMsg> burst);

  /// Waits for the queues to drain, then closes every slave channel.
  void close();

  const InteractionSession& session() const { return session_; }
  std::vector<SlaveLinkStatus> status() const;
  std::uint32_t last_seq() const { return seq_; }

 private:
  struct Link {
    std::unique_ptr<wire::ByteSink> sink;
    std::deque<std::shared_ptr<const Bytes>> queue;
    SlaveLinkStatus status;
    std::thread thread;
  };

  ApplyResult broadcast(EventMsg e);
  void run_link(Link& link);

  InteractionSession session_;
  MasterOptions options_;
  std::uint32_t seq_ = 0;
  std::vector<std::unique_ptr<Link>> links_;
  mutable std::mutex mu_;
  std::condition_variable work_cv_;
  std::condition_variable space_cv_;
  bool closing_ = false;
  bool closed_ = false;
};

struct SlaveReport {
  std::uint64_t events = 0;
  std::uint64_t frames = 0;
  bool quit = false;
  /// Why the loop ended without QUIT.
  std::string diagnostic;
};

using FrameFn = std::function<void(const InteractionSession&)>;

/// Receives events until QUIT, applying each and calling on_frame once per
/// event that changed the camera or the view flags.
SlaveReport slave_loop(InteractionSession& session, wire::ByteSource& in, const FrameFn& on_frame);

}  // namespace tw::interact
