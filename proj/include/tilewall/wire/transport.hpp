#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

#include "tilewall/bytes.hpp"

namespace tw::wire {

using Clock = std::chrono::steady_clock;

class ChannelClosed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sending half of a byte stream. One sender context per sink.
class ByteSink {
 public:
  virtual ~ByteSink() = default;
  /// Throws ChannelClosed if the peer is gone or the sink was closed.
  virtual void send(ByteView bytes) = 0;
  /// Orderly end of stream; the receiver sees EOF after draining.
  virtual void close() = 0;
};

/// Receiving half of a byte stream.
class ByteSource {
 public:
  virtual ~ByteSource() = default;
  /// Blocks until at least one byte is available. Returns 0 at end of stream.
  virtual std::size_t receive(std::span<std::uint8_t> into) = 0;
  /// Stops receiving; pending and future receive() calls return 0.
  virtual void close() = 0;
};

struct ThrottleSpec {
  double bandwidth_bits_per_sec = 1e8;
  double latency_sec = 0.0;
  /// Fraction of nominal bandwidth achieved after protocol overhead.
  double efficiency = 1.0;

  double effective_bits_per_sec() const { return bandwidth_bits_per_sec * efficiency; }
  /// Model delivery time of n bytes on an idle link.
  double delivery_seconds(std::size_t n) const {
    return latency_sec + 8.0 * static_cast<double>(n) / effective_bits_per_sec();
  }
};

/// Throws std::invalid_argument unless bandwidth and efficiency are positive
/// and latency is non-negative.
void validate(const ThrottleSpec& spec);

/// How far a throttled sender may run ahead of the medium before send blocks.
inline constexpr std::chrono::microseconds kThrottleSendWindow{2000};
/// A receiver takes a message this early rather than sleeping for less.
inline constexpr std::chrono::microseconds kDeliverySlack{100};

/// A transmission medium with finite bandwidth. Transmissions are serialized:
/// a message starts when the medium frees up and occupies it for 8n/B seconds.
/// Several pipes may share one medium.
class ThrottledLink {
 public:
  explicit ThrottledLink(ThrottleSpec spec);

  struct Slot {
    Clock::time_point start;
    Clock::time_point delivered;
  };
  Slot reserve(std::size_t n, Clock::time_point now);
  const ThrottleSpec& spec() const { return spec_; }

 private:
  ThrottleSpec spec_;
  std::mutex mu_;
  Clock::time_point next_free_{};
};

/// In-process byte pipe. With a link attached, each send() is delivered no
/// earlier than its scheduled completion on that link; order is FIFO.
class Pipe {
 public:
  explicit Pipe(std::shared_ptr<ThrottledLink> link = nullptr) : link_(std::move(link)) {}

  /// Enqueues a copy and returns the scheduled delivery time. A throttled send
  /// blocks while its transmission would start more than kThrottleSendWindow
  /// in the future.
  Clock::time_point send(ByteView bytes);
  std::size_t receive(std::span<std::uint8_t> into);
  void close_send();
  void close_receive();

 private:
  struct Message {
    Clock::time_point deliver_at;
    Bytes data;
  };

  std::shared_ptr<ThrottledLink> link_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Message> queue_;
  std::size_t offset_ = 0;
  bool send_closed_ = false;
  bool receive_closed_ = false;
};

/// Connected (sink, source) pair over one Pipe.
std::pair<std::unique_ptr<ByteSink>, std::unique_ptr<ByteSource>> make_pipe(
    std::shared_ptr<ThrottledLink> link = nullptr);

/// Same as ByteSink::send but returns the scheduled delivery time.
Clock::time_point throttled_send(Pipe& pipe, ByteView bytes);

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; throws std::invalid_argument.
HostPort parse_host_port(const std::string& addr);

/// Connected TCP stream (TCP_NODELAY).
class TcpStream : public ByteSink, public ByteSource {
 public:
  explicit TcpStream(int fd);
  ~TcpStream() override;
  TcpStream(const TcpStream&) = delete;
  TcpStream& operator=(const TcpStream&) = delete;

  /// Retries refused connections until `timeout` elapses.
  static std::unique_ptr<TcpStream> connect(const std::string& addr,
                                            std::chrono::milliseconds timeout = std::chrono::seconds(10));

  void send(ByteView bytes) override;
  std::size_t receive(std::span<std::uint8_t> into) override;
  /// Half-closes the write side.
  void close() override;
  /// Unblocks a concurrent receive() and closes both directions.
  void shutdown();

 private:
  int fd_;
};

class TcpListener {
 public:
  /// Binds and listens; port 0 picks an ephemeral port. Throws std::runtime_error.
  explicit TcpListener(const std::string& addr);
  ~TcpListener();
  TcpListener(const TcpListener&) = delete;
  TcpListener& operator=(const TcpListener&) = delete;

  std::unique_ptr<TcpStream> accept();
  std::uint16_t port() const { return port_; }
  void close();

 private:
  int fd_;
  std::uint16_t port_ = 0;
};

}  // namespace tw::wire
