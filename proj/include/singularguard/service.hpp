#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <stop_token>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "singularguard/monitor.hpp"

namespace singularguard {

/// Bidirectional line transport.
class LineChannel {
 public:
  virtual ~LineChannel() = default;
  /// False at end of input.
  virtual bool read_line(std::string& line) = 0;
  virtual void write_line(std::string_view line) = 0;
  /// Unblocks a pending read_line from another thread, where the transport allows it.
  virtual void interrupt() {}
};

class StreamChannel : public LineChannel {
 public:
  StreamChannel(std::istream& in, std::ostream& out) : in_(in), out_(out) {}
  bool read_line(std::string& line) override;
  void write_line(std::string_view line) override;

 private:
  std::istream& in_;
  std::ostream& out_;
};

/// Owns a connected socket descriptor.
class SocketChannel : public LineChannel {
 public:
  explicit SocketChannel(int fd) : fd_(fd) {}
  ~SocketChannel() override;
  SocketChannel(const SocketChannel&) = delete;
  SocketChannel& operator=(const SocketChannel&) = delete;

  bool read_line(std::string& line) override;
  void write_line(std::string_view line) override;
  void interrupt() override;

 private:
  int fd_;
  std::string buffer_;
};

enum class ServiceMode {
  /// One response per request line.
  Streaming,
  /// Requests update the latest state; events go out at the loop frequency.
  Timed,
};

/// Answers each request line with one event or error line. Returns the
/// number of requests handled.
std::int64_t serve_streaming(LineChannel& channel, Monitor& monitor);

/// Runs the monitor loop over the latest received state until input ends or
/// `stop` is requested.
LoopSummary serve_timed(LineChannel& channel, Monitor& monitor, std::stop_token stop);

/// Newline-delimited JSON monitor service over TCP, one monitor session per
/// connection.
class TcpServer {
 public:
  TcpServer(const KinematicModel& model, const FuzzyEngine& engine, MonitorConfig cfg,
            ServiceMode mode);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  /// Binds and starts accepting. Port 0 picks a free port. Throws
  /// std::runtime_error if the address cannot be bound.
  void start(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  /// Closes the listener and all connections, then joins every thread.
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

 private:
  void accept_loop(std::stop_token stop);
  void handle(int fd, std::stop_token stop);

  const KinematicModel& model_;
  const FuzzyEngine& engine_;
  MonitorConfig cfg_;
  ServiceMode mode_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::mutex mu_;
  std::vector<int> open_fds_;
  std::vector<std::jthread> workers_;
  std::jthread acceptor_;
  std::atomic<bool> stopped_{false};
};

/// Parses "host:port". Throws std::invalid_argument.
std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text);

}  // namespace singularguard
