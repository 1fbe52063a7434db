#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>
#include <vector>

#include "backend.hpp"
#include "biggp/error.hpp"
#include "biggp/wire.hpp"
#include "worker.hpp"

extern char** environ;

namespace biggp::detail {

namespace {

void write_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t k = ::send(fd, data, len, MSG_NOSIGNAL);
    if (k < 0) {
      if (errno == EINTR) continue;
      raise(ErrorKind::WorkerCrashed, std::string("socket write failed: ") + std::strerror(errno));
    }
    data += k;
    len -= static_cast<std::size_t>(k);
  }
}

// False on orderly EOF before the first byte.
bool read_exact(int fd, std::uint8_t* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    ssize_t k = ::recv(fd, data + got, len - got, 0);
    if (k == 0) {
      if (got == 0) return false;
      raise(ErrorKind::WorkerCrashed, "connection closed mid-frame");
    }
    if (k < 0) {
      if (errno == EINTR) continue;
      raise(ErrorKind::WorkerCrashed, std::string("socket read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(k);
  }
  return true;
}

std::optional<Message> read_frame(int fd) {
  std::uint8_t header[wire::kHeaderBytes];
  if (!read_exact(fd, header, sizeof header)) return std::nullopt;
  std::uint64_t len = wire::body_length(header);
  std::vector<std::uint8_t> body(len);
  if (len > 0 && !read_exact(fd, body.data(), body.size()))
    raise(ErrorKind::WorkerCrashed, "connection closed mid-frame");
  return wire::decode_body(body);
}

void write_frame(int fd, const Message& m) {
  auto bytes = wire::encode(m);
  write_all(fd, bytes.data(), bytes.size());
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

// Master-side hub: every worker holds one connection to the master, which
// routes worker-to-worker frames. Frames from one source are forwarded by a
// single reader thread, so per-channel order is preserved.
class SocketBackend final : public Backend {
 public:
  SocketBackend(const ClusterOptions& opts, int workers)
      : sockets_(static_cast<std::size_t>(workers) + 1, -1),
        write_mu_(static_cast<std::size_t>(workers) + 1) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) raise(ErrorKind::BackendUnavailable, "cannot create socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(opts.port));
    if (::inet_pton(AF_INET, opts.host.c_str(), &addr.sin_addr) != 1)
      raise(ErrorKind::BackendUnavailable, "bad host address '" + opts.host + "'");
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
        ::listen(listen_fd_, workers + 4) != 0) {
      ::close(listen_fd_);
      raise(ErrorKind::BackendUnavailable, std::string("cannot listen: ") + std::strerror(errno));
    }
    socklen_t alen = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &alen);
    port_ = ntohs(addr.sin_port);

    try {
      if (opts.launch_workers) launch(opts, workers);
      accept_workers(workers);
    } catch (...) {
      abandon();
      throw;
    }
    for (int r = 1; r <= workers; ++r) readers_.emplace_back([this, r] { route_from(r); });
  }

  ~SocketBackend() override { close(); }

  void send(Message m) override { forward(std::move(m)); }
  Mailbox& master_mailbox() override { return master_; }

  void close() override {
    if (closed_.exchange(true)) return;
    for (std::size_t r = 1; r < sockets_.size(); ++r)
      if (sockets_[r] >= 0) ::shutdown(sockets_[r], SHUT_RDWR);
    for (auto& t : readers_)
      if (t.joinable()) t.join();
    for (std::size_t r = 1; r < sockets_.size(); ++r)
      if (sockets_[r] >= 0) ::close(sockets_[r]);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    master_.close("cluster is shut down");
    reap();
  }

 private:
  void launch(const ClusterOptions& opts, int workers) {
    if (opts.worker_executable.empty() || ::access(opts.worker_executable.c_str(), X_OK) != 0)
      raise(ErrorKind::BackendUnavailable,
            "worker executable '" + opts.worker_executable + "' is not available");
    std::string endpoint = opts.host + ":" + std::to_string(port_);
    for (int r = 1; r <= workers; ++r) {
      std::string rank = std::to_string(r);
      std::vector<std::string> args{opts.worker_executable, "worker", "--connect", endpoint,
                                    "--rank", rank};
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      pid_t pid;
      if (::posix_spawn(&pid, opts.worker_executable.c_str(), nullptr, nullptr, argv.data(),
                        environ) != 0)
        raise(ErrorKind::BackendUnavailable, "failed to start worker " + rank);
      children_.push_back(pid);
    }
  }

  void accept_workers(int workers) {
    for (int accepted = 0; accepted < workers;) {
      pollfd p{listen_fd_, POLLIN, 0};
      int ready = ::poll(&p, 1, 30000);
      if (ready <= 0) raise(ErrorKind::BackendUnavailable, "timed out waiting for workers");
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      set_nodelay(fd);
      auto hello = read_frame(fd);
      if (!hello || phase_label(hello->tag.phase) != Phase::Hello || hello->src < 1 ||
          hello->src > workers || sockets_[static_cast<std::size_t>(hello->src)] >= 0) {
        ::close(fd);
        continue;
      }
      sockets_[static_cast<std::size_t>(hello->src)] = fd;
      ++accepted;
    }
  }

  void forward(Message m) {
    if (m.dst == 0) {
      master_.deliver(std::move(m));
      return;
    }
    auto dst = static_cast<std::size_t>(m.dst);
    if (dst >= sockets_.size()) raise(ErrorKind::Internal, "message to unknown rank");
    std::lock_guard lock(write_mu_[dst]);
    write_frame(sockets_[dst], m);
  }

  void route_from(int rank) {
    int fd = sockets_[static_cast<std::size_t>(rank)];
    try {
      for (;;) {
        auto m = read_frame(fd);
        if (!m) break;
        m->src = rank;
        forward(std::move(*m));
      }
    } catch (const Error&) {
    }
    if (!closed_.load()) master_.close("worker " + std::to_string(rank) + " disconnected", true);
  }

  void abandon() {
    for (int fd : sockets_)
      if (fd >= 0) ::close(fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
    listen_fd_ = -1;
    std::fill(sockets_.begin(), sockets_.end(), -1);
    for (pid_t pid : children_) ::kill(pid, SIGTERM);
    reap();
    closed_ = true;
  }

  void reap() {
    for (pid_t pid : children_) {
      int status;
      ::waitpid(pid, &status, 0);
    }
    children_.clear();
  }

  int listen_fd_ = -1;
  int port_ = 0;
  std::vector<int> sockets_;
  std::vector<std::mutex> write_mu_;
  std::vector<std::thread> readers_;
  std::vector<pid_t> children_;
  Mailbox master_;
  std::atomic<bool> closed_{false};
};

class SocketLink final : public Link {
 public:
  explicit SocketLink(int fd) : fd_(fd) {
    reader_ = std::thread([this] {
      try {
        while (auto m = read_frame(fd_)) mailbox_.deliver(std::move(*m));
      } catch (const Error&) {
      }
      mailbox_.close("connection to master closed");
    });
  }

  ~SocketLink() override {
    ::shutdown(fd_, SHUT_RDWR);
    if (reader_.joinable()) reader_.join();
    ::close(fd_);
  }

  void send(Message m) override {
    std::lock_guard lock(mu_);
    write_frame(fd_, m);
  }

  Mailbox& mailbox() override { return mailbox_; }

 private:
  int fd_;
  std::mutex mu_;
  Mailbox mailbox_;
  std::thread reader_;
};

}  // namespace

std::unique_ptr<Backend> make_socket_backend(const ClusterOptions& options, int workers) {
  return std::make_unique<SocketBackend>(options, workers);
}

}  // namespace biggp::detail

namespace biggp {

int run_socket_worker(const std::string& host, int port, int rank) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return 4;
  int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  int rc = fd < 0 ? -1 : ::connect(fd, res->ai_addr, res->ai_addrlen);
  ::freeaddrinfo(res);
  if (rc != 0) {
    if (fd >= 0) ::close(fd);
    return 4;
  }
  detail::set_nodelay(fd);
  Message hello;
  hello.src = rank;
  hello.dst = 0;
  hello.tag = {"", make_phase(Phase::Hello, 0), 0, 0};
  detail::write_frame(fd, hello);
  detail::SocketLink link(fd);
  detail::Worker worker(rank, link);
  worker.run();
  return 0;
}

}  // namespace biggp
