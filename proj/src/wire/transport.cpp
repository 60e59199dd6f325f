#include "tilewall/wire/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <thread>

namespace tw::wire {

void validate(const ThrottleSpec& spec) {
  if (!(spec.bandwidth_bits_per_sec > 0.0)) throw std::invalid_argument("throttle bandwidth must be positive");
  if (!(spec.efficiency > 0.0)) throw std::invalid_argument("throttle efficiency must be positive");
  if (!(spec.latency_sec >= 0.0)) throw std::invalid_argument("throttle latency must be non-negative");
}

ThrottledLink::ThrottledLink(ThrottleSpec spec) : spec_(spec) { validate(spec_); }

ThrottledLink::Slot ThrottledLink::reserve(std::size_t n, Clock::time_point now) {
  const auto transfer = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(8.0 * static_cast<double>(n) / spec_.effective_bits_per_sec()));
  const auto latency =
      std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(spec_.latency_sec));
  std::lock_guard lock(mu_);
  const Clock::time_point start = std::max(now, next_free_);
  next_free_ = start + transfer;
  return {start, next_free_ + latency};
}

Clock::time_point Pipe::send(ByteView bytes) {
  Clock::time_point start{};
  Clock::time_point deliver_at{};
  if (link_) {
    const ThrottledLink::Slot slot = link_->reserve(bytes.size(), Clock::now());
    start = slot.start;
    deliver_at = slot.delivered;
  }
  {
    std::lock_guard lock(mu_);
    if (send_closed_ || receive_closed_) throw ChannelClosed("pipe is closed");
    queue_.push_back({deliver_at, Bytes(bytes.begin(), bytes.end())});
  }
  cv_.notify_all();
  if (link_ && start - Clock::now() > kThrottleSendWindow) std::this_thread::sleep_until(start - kThrottleSendWindow);
  return deliver_at;
}

std::size_t Pipe::receive(std::span<std::uint8_t> into) {
  std::unique_lock lock(mu_);
  for (;;) {
    if (receive_closed_) return 0;
    if (!queue_.empty()) {
      const Clock::time_point due = queue_.front().deliver_at;
      if (Clock::now() + kDeliverySlack >= due) break;
      cv_.wait_until(lock, due);
      continue;
    }
    if (send_closed_) return 0;
    cv_.wait(lock);
  }
  // Copy every message that is due, not just the first.
  const Clock::time_point now = Clock::now() + kDeliverySlack;
  std::size_t n = 0;
  while (n < into.size() && !queue_.empty() && queue_.front().deliver_at <= now) {
    Message& front = queue_.front();
    const std::size_t k = std::min(into.size() - n, front.data.size() - offset_);
    std::memcpy(into.data() + n, front.data.data() + offset_, k);
    n += k;
    offset_ += k;
    if (offset_ == front.data.size()) {
      queue_.pop_front();
      offset_ = 0;
    }
  }
  return n;
}

void Pipe::close_send() {
  {
    std::lock_guard lock(mu_);
    send_closed_ = true;
  }
  cv_.notify_all();
}

void Pipe::close_receive() {
  {
    std::lock_guard lock(mu_);
    receive_closed_ = true;
    queue_.clear();
  }
  cv_.notify_all();
}

namespace {

class PipeSink : public ByteSink {
 public:
  explicit PipeSink(std::shared_ptr<Pipe> pipe) : pipe_(std::move(pipe)) {}
  ~PipeSink() override { pipe_->close_send(); }
  void send(ByteView bytes) override { pipe_->send(bytes); }
  void close() override { pipe_->close_send(); }

 private:
  std::shared_ptr<Pipe> pipe_;
};

class PipeSource : public ByteSource {
 public:
  explicit PipeSource(std::shared_ptr<Pipe> pipe) : pipe_(std::move(pipe)) {}
  ~PipeSource() override { pipe_->close_receive(); }
  std::size_t receive(std::span<std::uint8_t> into) override { return pipe_->receive(into); }
  void close() override { pipe_->close_receive(); }

 private:
  std::shared_ptr<Pipe> pipe_;
};

}  // namespace

std::pair<std::unique_ptr<ByteSink>, std::unique_ptr<ByteSource>> make_pipe(std::shared_ptr<ThrottledLink> link) {
  auto pipe = std::make_shared<Pipe>(std::move(link));
  return {std::make_unique<PipeSink>(pipe), std::make_unique<PipeSource>(pipe)};
}

Clock::time_point throttled_send(Pipe& pipe, ByteView bytes) { return pipe.send(bytes); }

HostPort parse_host_port(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon + 1 == addr.size()) {
    throw std::invalid_argument("address '" + addr + "' is not host:port");
  }
  HostPort hp;
  hp.host = addr.substr(0, colon);
  if (hp.host.empty()) hp.host = "0.0.0.0";
  const std::string port = addr.substr(colon + 1);
  if (port.find_first_not_of("0123456789") != std::string::npos || port.size() > 5 || std::stoul(port) > 65535) {
    throw std::invalid_argument("address '" + addr + "' has an invalid port");
  }
  hp.port = static_cast<std::uint16_t>(std::stoul(port));
  return hp;
}

namespace {

sockaddr_in resolve(const HostPort& hp) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(hp.port);
  if (inet_pton(AF_INET, hp.host.c_str(), &sa.sin_addr) == 1) return sa;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(hp.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw std::runtime_error("cannot resolve host '" + hp.host + "'");
  }
  sa.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return sa;
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

TcpStream::TcpStream(int fd) : fd_(fd) {
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

TcpStream::~TcpStream() {
  if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpStream> TcpStream::connect(const std::string& addr, std::chrono::milliseconds timeout) {
  const sockaddr_in sa = resolve(parse_host_port(addr));
  const auto deadline = Clock::now() + timeout;
  for (;;) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket: " + errno_text());
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) == 0) return std::make_unique<TcpStream>(fd);
    const int err = errno;
    ::close(fd);
    if ((err != ECONNREFUSED && err != ENOENT) || Clock::now() >= deadline) {
      throw std::runtime_error("connect " + addr + ": " + std::strerror(err));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

void TcpStream::send(ByteView bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ChannelClosed("send: " + errno_text());
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t TcpStream::receive(std::span<std::uint8_t> into) {
  for (;;) {
    const ssize_t n = ::recv(fd_, into.data(), into.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    return 0;
  }
}

void TcpStream::close() { ::shutdown(fd_, SHUT_WR); }

void TcpStream::shutdown() { ::shutdown(fd_, SHUT_RDWR); }

TcpListener::TcpListener(const std::string& addr) {
  const sockaddr_in sa = resolve(parse_host_port(addr));
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("socket: " + errno_text());
  int one = 1;
  ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd_, reinterpret_cast<const sockaddr*>(&sa), sizeof(sa)) != 0) {
    const std::string why = errno_text();
    ::close(fd_);
    throw std::runtime_error("bind " + addr + ": " + why);
  }
  if (::listen(fd_, 64) != 0) {
    const std::string why = errno_text();
    ::close(fd_);
    throw std::runtime_error("listen " + addr + ": " + why);
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

std::unique_ptr<TcpStream> TcpListener::accept() {
  for (;;) {
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd >= 0) return std::make_unique<TcpStream>(fd);
    if (errno == EINTR) continue;
    throw std::runtime_error("accept: " + errno_text());
  }
}

void TcpListener::close() {
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
    ::close(fd_);
    fd_ = -1;
  }
}

}  // namespace tw::wire
