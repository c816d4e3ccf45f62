#include "photonsync/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <exception>
#include <mutex>
#include <thread>

#include "photonsync/errors.hpp"
#include "photonsync/wire.hpp"

namespace photonsync {
namespace {

std::string errno_text(const char* what) { return std::string(what) + ": " + std::strerror(errno); }

void put_u64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

/// Bounded single-producer single-consumer queue with close().
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(T item) {
    std::unique_lock lock(mutex_);
    not_full_.wait(lock, [&] { return items_.size() < capacity_ || closed_; });
    if (closed_) return;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
  }

  std::optional<T> pop() {
    std::unique_lock lock(mutex_);
    not_empty_.wait(lock, [&] { return !items_.empty() || closed_; });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mutex_;
  std::condition_variable not_empty_, not_full_;
};

struct ReceiverShared {
  ReceiveStats stats;
  std::exception_ptr error;
};

// Reads frames from the socket, restores index order and hands packages to
// the consumer through the queue.
void receive_loop(Socket& socket, BoundedQueue<DataPackage>& queue, const ReceiveOptions& options,
                  ReceiverShared& shared) {
  try {
    FrameDecoder decoder;
    ReorderBuffer reorder(options.reorder_window);
    std::vector<std::uint8_t> buffer(1 << 16);
    auto deliver = [&](std::vector<DecodedFrame> frames) {
      for (auto& f : frames) queue.push(std::move(f.package));
    };
    for (;;) {
      std::size_t n = 0;
      try {
        n = socket.receive(buffer);
      } catch (const TransportError&) {
        shared.stats.disconnected_early = true;
        break;
      }
      if (n == 0) break;
      shared.stats.bytes += n;
      decoder.feed(std::span(buffer.data(), n));
      while (auto event = decoder.next()) {
        if (auto* frame = std::get_if<DecodedFrame>(&*event)) {
          ++shared.stats.frames;
          deliver(reorder.push(std::move(*frame)));
        } else {
          ++shared.stats.corrupt;
        }
      }
    }
    if (decoder.buffered() > 0) shared.stats.disconnected_early = true;
    deliver(reorder.drain());
    shared.stats.duplicates = reorder.duplicates();
    shared.stats.skipped_bytes = decoder.skipped_bytes();
  } catch (...) {
    shared.error = std::current_exception();
  }
  queue.close();
}

void send_ack(Socket& socket, std::uint64_t index) {
  std::uint8_t bytes[8];
  put_u64(bytes, index);
  try {
    socket.send_all(bytes);
  } catch (const TransportError&) {
    // The sender may already have gone away; acknowledgements are advisory.
  }
}

DataPackage empty_like(const DataPackage& p) { return DataPackage(p.index(), p.start(), p.duration(), {}); }

}  // namespace

Endpoint Endpoint::parse(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos) throw ConfigError("endpoint must be host:port, got '" + std::string(text) + "'");
  Endpoint e;
  if (colon > 0) e.host = std::string(text.substr(0, colon));
  const auto port = text.substr(colon + 1);
  unsigned value = 0;
  const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc() || ptr != port.data() + port.size() || value > 65535)
    throw ConfigError("bad port in endpoint '" + std::string(text) + "'");
  e.port = static_cast<std::uint16_t>(value);
  return e;
}

std::string Endpoint::str() const { return host + ":" + std::to_string(port); }

Socket::~Socket() {
  if (fd_ >= 0) ::close(fd_);
}

Socket& Socket::operator=(Socket&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.release();
  }
  return *this;
}

void Socket::send_all(std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw TransportError(errno_text("send"), -1);
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::size_t Socket::receive(std::span<std::uint8_t> buffer) {
  for (;;) {
    const ssize_t n = ::recv(fd_, buffer.data(), buffer.size(), 0);
    if (n >= 0) return static_cast<std::size_t>(n);
    if (errno == EINTR) continue;
    throw TransportError(errno_text("recv"), -1);
  }
}

void Socket::shutdown_write() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
  if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

Socket Socket::connect(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(endpoint.port);
  if (const int rc = ::getaddrinfo(endpoint.host.c_str(), port.c_str(), &hints, &found); rc != 0)
    throw TransportError("resolve " + endpoint.str() + ": " + ::gai_strerror(rc), -1);
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
  std::string last_error = "no address";
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) {
      last_error = errno_text("socket");
      continue;
    }
    if (::connect(s.fd(), ai->ai_addr, ai->ai_addrlen) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    last_error = errno_text("connect");
  }
  throw TransportError("connect " + endpoint.str() + ": " + last_error, -1);
}

Listener::Listener(const Endpoint& endpoint) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(endpoint.port);
  const char* host = endpoint.host.empty() ? nullptr : endpoint.host.c_str();
  if (const int rc = ::getaddrinfo(host, port.c_str(), &hints, &found); rc != 0)
    throw TransportError("resolve " + endpoint.str() + ": " + ::gai_strerror(rc), -1);
  std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
  for (addrinfo* ai = found; ai != nullptr; ai = ai->ai_next) {
    Socket s(::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol));
    if (!s.valid()) continue;
    const int one = 1;
    ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(s.fd(), ai->ai_addr, ai->ai_addrlen) != 0 || ::listen(s.fd(), 1) != 0) continue;
    sockaddr_storage bound{};
    socklen_t len = sizeof bound;
    ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = bound.ss_family == AF_INET6 ? ntohs(reinterpret_cast<sockaddr_in6*>(&bound)->sin6_port)
                                        : ntohs(reinterpret_cast<sockaddr_in*>(&bound)->sin_port);
    socket_ = std::move(s);
    return;
  }
  throw TransportError("cannot listen on " + endpoint.str() + ": " + std::strerror(errno), -1);
}

Socket Listener::accept() {
  for (;;) {
    const int fd = ::accept(socket_.fd(), nullptr, nullptr);
    if (fd >= 0) {
      const int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return Socket(fd);
    }
    if (errno != EINTR) throw TransportError(errno_text("accept"), -1);
  }
}

ServeSummary serve_stream(Listener& listener, const PackageSource& source, const ServeOptions& options) {
  Socket client = listener.accept();
  std::atomic<std::int64_t> last_acked{-1};
  std::atomic<bool> finished{false};
  std::atomic<std::int64_t> deadline_ms{0};

  // Acknowledgements arrive as 8-byte indices; this thread only reads.
  std::thread reader([&] {
    std::uint8_t buf[256];
    std::size_t have = 0;
    for (;;) {
      pollfd pfd{client.fd(), POLLIN, 0};
      const int rc = ::poll(&pfd, 1, 100);
      if (rc < 0 && errno != EINTR) return;
      if (rc <= 0) {
        if (finished.load()) {
          const auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now().time_since_epoch()).count();
          if (now > deadline_ms.load()) return;
        }
        continue;
      }
      const ssize_t n = ::recv(client.fd(), buf + have, sizeof buf - have, 0);
      if (n <= 0) return;
      have += static_cast<std::size_t>(n);
      std::size_t used = 0;
      while (have - used >= 8) {
        last_acked.store(static_cast<std::int64_t>(get_u64(buf + used)));
        used += 8;
      }
      std::memmove(buf, buf + used, have - used);
      have -= used;
    }
  });

  ServeSummary summary;
  std::optional<std::vector<std::uint8_t>> held;
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Ticks> first_start;
  auto send = [&](const std::vector<std::uint8_t>& frame) {
    try {
      client.send_all(frame);
    } catch (const TransportError& e) {
      throw TransportError(e.what(), last_acked.load());
    }
    ++summary.frames;
    summary.bytes += frame.size();
  };

  try {
    bool disconnected = false;
    while (auto package = source()) {
      const std::uint64_t index = package->index();
      if (options.shim.disconnect_before && index >= *options.shim.disconnect_before) {
        client.shutdown_both();
        disconnected = true;
        break;
      }
      if (options.pacing == Pacing::RealTime) {
        if (!first_start) first_start = package->start();
        const auto due = t0 + std::chrono::nanoseconds((package->end() - *first_start) / 1000);
        std::this_thread::sleep_until(due);
      }
      if (options.shim.drop.count(index)) continue;
      std::vector<std::uint8_t> frame = encode_frame(*package, options.party);
      if (options.shim.corrupt.count(index)) frame[20] ^= 0x5a;  // inside the start field
      if (options.shim.hold_one.count(index) && !held) {
        held = std::move(frame);
        continue;
      }
      send(frame);
      if (held) {
        send(*held);
        held.reset();
      }
    }
    if (held && !disconnected) send(*held);
    if (!disconnected) client.shutdown_write();
  } catch (...) {
    finished = true;
    deadline_ms = 0;
    client.shutdown_both();
    reader.join();
    throw;
  }
  deadline_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now().time_since_epoch()).count() +
                static_cast<std::int64_t>(options.ack_timeout_s * 1000);
  finished = true;
  reader.join();
  if (last_acked.load() >= 0) summary.last_acked = static_cast<std::uint64_t>(last_acked.load());
  return summary;
}

ServeSummary serve_stream(Listener& listener, const PackageStream& stream, ServeOptions options) {
  options.party = stream.party;
  std::size_t next = 0;
  return serve_stream(listener, [&]() -> std::optional<DataPackage> {
    if (next >= stream.packages.size()) return std::nullopt;
    return stream.packages[next++];
  }, options);
}

ServeSummary serve_stream(const PackageStream& stream, const Endpoint& endpoint, ServeOptions options) {
  Listener listener(endpoint);
  return serve_stream(listener, stream, std::move(options));
}

std::vector<DataPackage> receive_packages(const Endpoint& endpoint, ReceiveStats* stats,
                                          const ReceiveOptions& options) {
  Socket socket = Socket::connect(endpoint);
  BoundedQueue<DataPackage> queue(options.queue_capacity);
  ReceiverShared shared;
  std::thread receiver([&] { receive_loop(socket, queue, options, shared); });
  std::vector<DataPackage> out;
  while (auto p = queue.pop()) {
    send_ack(socket, p->index());
    out.push_back(std::move(*p));
  }
  receiver.join();
  if (shared.error) std::rethrow_exception(shared.error);
  std::uint64_t expect = out.empty() ? 0 : out.front().index();
  for (const auto& p : out) {
    for (; expect < p.index(); ++expect) shared.stats.missing.push_back(expect);
    expect = p.index() + 1;
  }
  if (stats) *stats = shared.stats;
  return out;
}

ReceiveResult receive_and_sync(const Endpoint& endpoint, const ScenarioConfig& config,
                               const SessionOptions& session, const ReceiveOptions& options) {
  SessionGenerator generator(config);
  SessionDriver driver(config, session, generator.truth());

  Socket socket = Socket::connect(endpoint);
  BoundedQueue<DataPackage> queue(options.queue_capacity);
  ReceiverShared shared;
  std::thread receiver([&] { receive_loop(socket, queue, options, shared); });

  ReceiveResult result;
  auto push_without_alice = [&](GeneratedPackage local) {
    result.stats.missing.push_back(local.index);
    local.alice = empty_like(local.bob);
    local.pairs.clear();
    driver.push(std::move(local));
  };

  std::optional<GeneratedPackage> local = generator.next();
  bool first = true;
  try {
    while (auto remote = queue.pop()) {
      const std::uint64_t index = remote->index();
      if (first && local) {
        const std::uint64_t slip = index > local->index ? index - local->index : local->index - index;
        if (slip > options.max_index_slip)
          throw AlignmentError("first received package " + std::to_string(index) + " is " +
                               std::to_string(slip) + " packages from the local stream");
        first = false;
      }
      while (local && local->index < index) {
        push_without_alice(std::move(*local));
        local = generator.next();
      }
      if (local && local->index == index) {
        local->alice = std::move(*remote);
        driver.push(std::move(*local));
        local = generator.next();
      }
      send_ack(socket, index);
    }
  } catch (...) {
    queue.close();
    socket.shutdown_both();
    receiver.join();
    throw;
  }
  receiver.join();
  if (shared.error) std::rethrow_exception(shared.error);
  while (local) {
    push_without_alice(std::move(*local));
    local = generator.next();
  }
  auto missing = std::move(result.stats.missing);
  result.stats = shared.stats;
  result.stats.missing = std::move(missing);
  result.report = driver.finish();
  return result;
}

}  // namespace photonsync
