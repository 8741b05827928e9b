#include "singularguard/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "singularguard/wire.hpp"

namespace singularguard {

namespace {

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

class ChannelSink : public EventSink {
 public:
  ChannelSink(LineChannel& channel, std::mutex& mu) : channel_(channel), mu_(mu) {}

  void on_event(const MonitorEvent& ev) override {
    std::lock_guard lock(mu_);
    channel_.write_line(to_line(event_to_json(ev)));
  }

  void on_velocity_warning(const MonitorEvent& ev) override {
    std::lock_guard lock(mu_);
    channel_.write_line(to_line(velocity_warning_json(ev)));
  }

 private:
  LineChannel& channel_;
  std::mutex& mu_;
};

}  // namespace

bool StreamChannel::read_line(std::string& line) {
  if (!std::getline(in_, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

void StreamChannel::write_line(std::string_view line) {
  out_ << line << '\n';
  out_.flush();
}

SocketChannel::~SocketChannel() {
  if (fd_ >= 0) ::close(fd_);
}

bool SocketChannel::read_line(std::string& line) {
  while (true) {
    const auto nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) {
      if (buffer_.empty()) return false;
      line = std::move(buffer_);
      buffer_.clear();
      return true;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

void SocketChannel::write_line(std::string_view line) {
  std::string data(line);
  data.push_back('\n');
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return;
    sent += static_cast<std::size_t>(n);
  }
}

void SocketChannel::interrupt() { ::shutdown(fd_, SHUT_RDWR); }

std::int64_t serve_streaming(LineChannel& channel, Monitor& monitor) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  std::int64_t handled = 0;
  std::string line;
  while (channel.read_line(line)) {
    if (blank(line)) continue;
    ++handled;
    try {
      const StateRequest req = parse_request(line);
      const double ts = std::chrono::duration<double>(clock::now() - start).count();
      const MonitorEvent ev = monitor.process(req.q, req.qdot, ts);
      channel.write_line(to_line(event_to_json(ev)));
      if (ev.velocity_warning) channel.write_line(to_line(velocity_warning_json(ev)));
    } catch (const WireError& e) {
      channel.write_line(to_line(error_json(e.what())));
    }
  }
  return handled;
}

LoopSummary serve_timed(LineChannel& channel, Monitor& monitor, std::stop_token stop) {
  LatestStateSource source;
  std::mutex write_mu;
  ChannelSink sink(channel, write_mu);
  std::jthread reader([&] {
    std::string line;
    while (channel.read_line(line)) {
      if (blank(line)) continue;
      try {
        const StateRequest req = parse_request(line);
        source.push({req.q, req.qdot, std::chrono::steady_clock::now()});
      } catch (const WireError& e) {
        std::lock_guard lock(write_mu);
        channel.write_line(to_line(error_json(e.what())));
      }
    }
    source.close();
  });
  const LoopSummary summary = run_monitor_loop(monitor, source, sink, stop);
  if (summary.exit == LoopExit::Cancelled) channel.interrupt();
  reader.join();
  return summary;
}

std::pair<std::string, std::uint16_t> parse_endpoint(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw std::invalid_argument("endpoint must look like host:port");
  }
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || end != digits.data() + digits.size() || port > 65535) {
    throw std::invalid_argument("invalid port in endpoint \"" + std::string(text) + "\"");
  }
  return {std::string(text.substr(0, colon)), static_cast<std::uint16_t>(port)};
}

TcpServer::TcpServer(const KinematicModel& model, const FuzzyEngine& engine, MonitorConfig cfg,
                     ServiceMode mode)
    : model_(model), engine_(engine), cfg_(std::move(cfg)), mode_(mode) {
  cfg_.validate();
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::start(const std::string& host, std::uint16_t port) {
  if (listen_fd_ >= 0) throw std::logic_error("server already started");
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res); rc != 0) {
    throw std::runtime_error("cannot resolve " + host + ": " + ::gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  }
  const int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
    const std::string err = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(fd);
    throw std::runtime_error("cannot listen on " + host + ":" + service + ": " + err);
  }
  ::freeaddrinfo(res);
  sockaddr_in bound{};
  socklen_t len = sizeof bound;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
  listen_fd_ = fd;
  stopped_ = false;
  acceptor_ = std::jthread([this](std::stop_token st) { accept_loop(st); });
}

void TcpServer::accept_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      return;
    }
    std::lock_guard lock(mu_);
    if (stopped_) {
      ::close(fd);
      return;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd](std::stop_token st) { handle(fd, st); });
  }
}

void TcpServer::handle(int fd, std::stop_token stop) {
  {
    SocketChannel channel(fd);
    Monitor monitor(model_, engine_, cfg_);
    if (mode_ == ServiceMode::Streaming) {
      serve_streaming(channel, monitor);
    } else {
      serve_timed(channel, monitor, stop);
    }
    // Deregister before the channel closes the descriptor so stop() never
    // touches a recycled fd.
    std::lock_guard lock(mu_);
    open_fds_.erase(std::remove(open_fds_.begin(), open_fds_.end(), fd), open_fds_.end());
  }
}

void TcpServer::stop() {
  std::vector<std::jthread> workers;
  {
    std::lock_guard lock(mu_);
    if (listen_fd_ < 0) return;
    stopped_ = true;
    ::shutdown(listen_fd_, SHUT_RDWR);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    for (auto& w : workers_) w.request_stop();
    workers = std::move(workers_);
    workers_.clear();
  }
  if (acceptor_.joinable()) {
    acceptor_.request_stop();
    acceptor_.join();
  }
  for (auto& w : workers) w.join();
  {
    std::lock_guard lock(mu_);
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  stopped_.notify_all();
}

void TcpServer::wait() { stopped_.wait(false); }

}  // namespace singularguard
