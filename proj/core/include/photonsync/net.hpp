#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "photonsync/session.hpp"
#include "photonsync/timetag.hpp"

namespace photonsync {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  /// "host:port" or ":port". Throws ConfigError.
  static Endpoint parse(std::string_view text);
  std::string str() const;
};

/// Owned socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    const int fd = fd_;
    fd_ = -1;
    return fd;
  }

  /// Throws TransportError.
  void send_all(std::span<const std::uint8_t> bytes);
  /// Returns 0 at end of stream. Throws TransportError.
  std::size_t receive(std::span<std::uint8_t> buffer);
  void shutdown_write();
  void shutdown_both();

  static Socket connect(const Endpoint& endpoint);

 private:
  int fd_ = -1;
};

/// Bound, listening TCP socket. Port 0 picks an ephemeral port.
class Listener {
 public:
  explicit Listener(const Endpoint& endpoint);
  std::uint16_t port() const { return port_; }
  Socket accept();

 private:
  Socket socket_;
  std::uint16_t port_ = 0;
};

enum class Pacing { MaxSpeed, RealTime };

/// Transport faults injected by the sender, for tests.
struct TransportShim {
  std::set<std::uint64_t> corrupt;       // flip a payload byte
  std::set<std::uint64_t> drop;          // never sent
  std::set<std::uint64_t> hold_one;      // sent after the following frame
  std::optional<std::uint64_t> disconnect_before;  // close before this index
};

struct ServeOptions {
  Pacing pacing = Pacing::MaxSpeed;
  Party party = Party::Alice;
  TransportShim shim;
  /// Wait this long for the final acknowledgement after the last frame.
  double ack_timeout_s = 30.0;
};

struct ServeSummary {
  std::size_t frames = 0;
  std::size_t bytes = 0;
  std::optional<std::uint64_t> last_acked;
};

using PackageSource = std::function<std::optional<DataPackage>()>;

/// Accepts one client on `listener` and streams packages as frames in index
/// order. The client acknowledges each consumed index with 8 little-endian
/// bytes. Throws TransportError (carrying the last acknowledged index) if
/// the connection fails.
ServeSummary serve_stream(Listener& listener, const PackageSource& source, const ServeOptions& options);
ServeSummary serve_stream(Listener& listener, const PackageStream& stream, ServeOptions options);
ServeSummary serve_stream(const PackageStream& stream, const Endpoint& endpoint, ServeOptions options);

struct ReceiveOptions {
  std::size_t queue_capacity = 64;
  std::size_t reorder_window = 4;
  std::uint64_t max_index_slip = 4;
};

struct ReceiveStats {
  std::size_t frames = 0;
  std::size_t corrupt = 0;
  std::size_t duplicates = 0;
  std::size_t bytes = 0;
  std::size_t skipped_bytes = 0;
  std::vector<std::uint64_t> missing;
  bool disconnected_early = false;
};

struct ReceiveResult {
  SessionReport report;
  ReceiveStats stats;
};

/// Bob's side: connects, regenerates its own stream from the scenario,
/// matches received Alice frames by index and runs the pipeline on them.
/// Throws AlignmentError if the first received index slips too far.
ReceiveResult receive_and_sync(const Endpoint& endpoint, const ScenarioConfig& config,
                               const SessionOptions& session, const ReceiveOptions& options = {});

/// Receives frames only, reordered and acknowledged, without syncing.
std::vector<DataPackage> receive_packages(const Endpoint& endpoint, ReceiveStats* stats = nullptr,
                                          const ReceiveOptions& options = {});

}  // namespace photonsync
