#include "smart/sut.hpp"

#include "smart/hash.hpp"
#include "smart/image_io.hpp"
#include "smart/protocol.hpp"

#include <nlohmann/json.hpp>

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>

namespace smart {

std::string_view to_string(SutKind k) {
  switch (k) {
    case SutKind::InProcessStub: return "stub";
    case SutKind::ChildProcess: return "proc";
    case SutKind::Network: return "net";
  }
  return "?";
}

std::string_view to_string(ClampPolicy p) { return p == ClampPolicy::Clamp ? "clamp" : "reject"; }

void SutDescriptor::validate() const {
  if (timeout_ms <= 0) throw InvalidValue("timeout_ms must be > 0");
  if (target.empty()) throw InvalidValue("SUT target must not be empty");
  if (kind == SutKind::InProcessStub && target != "constant-zero" && target != "scripted" &&
      target != "brightness-centroid")
    throw InvalidValue("unknown stub '" + target + "'");
  if (kind == SutKind::InProcessStub && target == "scripted" && !script)
    throw InvalidValue("stub:scripted needs a script file");
  if (kind == SutKind::Network) {
    const auto colon = target.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == target.size())
      throw InvalidValue("network target must be HOST:PORT");
  }
}

SutDescriptor SutDescriptor::parse(std::string_view spec) {
  const auto colon = spec.find(':');
  if (colon == std::string_view::npos) throw InvalidValue("SUT must be stub:NAME, proc:CMD or net:HOST:PORT");
  const auto scheme = spec.substr(0, colon);
  SutDescriptor d;
  d.target = std::string(spec.substr(colon + 1));
  if (scheme == "stub") {
    d.kind = SutKind::InProcessStub;
  } else if (scheme == "proc") {
    d.kind = SutKind::ChildProcess;
  } else if (scheme == "net") {
    d.kind = SutKind::Network;
  } else {
    throw InvalidValue("unknown SUT scheme '" + std::string(scheme) + "'");
  }
  if (d.target.empty()) throw InvalidValue("SUT target must not be empty");
  return d;
}

std::string SutDescriptor::to_spec() const { return std::string(to_string(kind)) + ":" + target; }

// --- stubs -----------------------------------------------------------------

ScriptedStub ScriptedStub::parse(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("script: ") + e.what());
  }
  std::map<Key, double> table;
  std::optional<double> fallback;
  try {
    for (const auto& e : doc.at("entries")) {
      Key k{e.at("frame_id").get<std::int64_t>(), e.at("config").get<std::string>()};
      if (!table.emplace(k, e.at("sa").get<double>()).second)
        throw ParseError("script: duplicate entry for frame " + std::to_string(k.first) + " / " + k.second);
    }
    if (doc.contains("default")) fallback = doc.at("default").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("script: ") + e.what());
  }
  return ScriptedStub(std::move(table), fallback);
}

ScriptedStub ScriptedStub::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open script " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

double ScriptedStub::predict(const ExecutionRequest& request) {
  auto it = table_.find({request.frame_id, request.config_label});
  if (it != table_.end()) return it->second;
  if (fallback_) return *fallback_;
  throw SutError("script has no entry for frame " + std::to_string(request.frame_id) + " / " +
                 request.config_label);
}

double brightness_centroid_angle(const RgbImage& image, double gain) {
  if (image.empty()) return 0.0;
  const Eigen::ArrayXd column_mass = luminance(image).colwise().sum().transpose();
  const double total = column_mass.sum();
  if (total <= 0.0) return 0.0;
  const double half = image.width() / 2.0;
  const Eigen::ArrayXd centres = Eigen::ArrayXd::LinSpaced(image.width(), 0.5, image.width() - 0.5);
  const double centroid = (column_mass * centres).sum() / total;
  return gain * (centroid - half) / half;
}

double BrightnessCentroidStub::predict(const ExecutionRequest& request) {
  if (!request.image) throw SutError("brightness-centroid needs an image");
  return brightness_centroid_angle(*request.image, gain_);
}

// --- external adapters -------------------------------------------------------

std::string request_id(std::int64_t frame_id, std::string_view label) {
  return std::to_string(frame_id) + ":" + std::string(label);
}

std::filesystem::path scratch_path(const std::filesystem::path& dir, std::int64_t frame_id, std::string_view label) {
  std::string key = std::to_string(frame_id);
  key.push_back('\0');
  key.append(label);
  return dir / (sha256_hex(key).substr(0, 32) + ".png");
}

namespace {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

using Clock = std::chrono::steady_clock;

// Buffered line reader/writer over a pair of descriptors.
class LineChannel {
 public:
  void reset(int read_fd, int write_fd) {
    read_fd_ = read_fd;
    write_fd_ = write_fd;
    buffer_.clear();
  }

  void send_line(const std::string& line, bool socket) {
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = socket ? ::send(write_fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                               : ::write(write_fd_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw SutCrashed(std::string("write to SUT failed: ") + std::strerror(errno));
      }
      off += static_cast<std::size_t>(n);
    }
  }

  // Throws Timeout past the deadline and SutCrashed on EOF.
  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (remaining.count() <= 0) throw Timeout("SUT did not answer in time");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw SutCrashed(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw Timeout("SUT did not answer in time");
      char buf[4096];
      const ssize_t n = ::read(read_fd_, buf, sizeof buf);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw SutCrashed(std::string("read from SUT failed: ") + std::strerror(errno));
      }
      if (n == 0) throw SutCrashed("SUT closed its output");
      buffer_.append(buf, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_ = -1;
  int write_fd_ = -1;
  std::string buffer_;
};

// Writes the image, runs one request/response exchange, removes the file.
template <typename Exchange>
double run_exchange(const ExternalOptions& opts, const ExecutionRequest& request, Exchange&& exchange) {
  if (!request.image) throw SutError("external SUT needs an image");
  std::filesystem::create_directories(opts.scratch_dir);
  const auto path = scratch_path(opts.scratch_dir, request.frame_id, request.config_label);
  write_png(path, *request.image);
  struct Cleanup {
    std::filesystem::path p;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove(p, ec);
    }
  } cleanup{path};

  const ProtocolRequest req{request_id(request.frame_id, request.config_label), path.string()};
  const ProtocolResponse resp = exchange(encode_request(req), req.id);
  if (resp.error) throw SutError("SUT reported: " + *resp.error);
  return *resp.sa;
}

std::vector<std::string> split_command(const std::string& cmd) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false, have = false;
  for (char c : cmd) {
    if (c == '"') {
      in_quotes = !in_quotes;
      have = true;
    } else if (!in_quotes && (c == ' ' || c == '\t')) {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur.push_back(c);
      have = true;
    }
  }
  if (in_quotes) throw InvalidValue("unbalanced quotes in command: " + cmd);
  if (have) out.push_back(cur);
  return out;
}

}  // namespace

struct ChildProcessModel::Impl {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  LineChannel channel;

  ~Impl() { stop(); }

  void spawn(const std::string& command) {
    const auto args = split_command(command);
    if (args.empty()) throw SutUnreachable("empty SUT command");
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw SutUnreachable("pipe failed");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw SutUnreachable("pipe failed");
    }
    if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
      throw SutUnreachable("pipe failed");
    }

    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    const pid_t child = ::fork();
    if (child < 0) {
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
      throw SutUnreachable("fork failed");
    }
    if (child == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::execvp(argv[0], argv.data());
      const int err = errno;
      [[maybe_unused]] auto n = ::write(err_pipe[1], &err, sizeof err);
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    int exec_errno = 0;
    ssize_t n;
    do {
      n = ::read(err_pipe[0], &exec_errno, sizeof exec_errno);
    } while (n < 0 && errno == EINTR);
    ::close(err_pipe[0]);
    if (n > 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::waitpid(child, nullptr, 0);
      throw SutUnreachable("cannot exec '" + args[0] + "': " + std::strerror(exec_errno));
    }
    pid = child;
    to_child = in_pipe[1];
    from_child = out_pipe[0];
    channel.reset(from_child, to_child);
  }

  std::string reap() {
    if (pid < 0) return "not running";
    int status = 0;
    // Give a closing child a moment to exit on its own before killing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid, &status, WNOHANG) == pid) {
        pid = -1;
        break;
      }
      ::usleep(2000);
    }
    if (pid >= 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      pid = -1;
    }
    close_fds();
    if (WIFEXITED(status)) return "exited with status " + std::to_string(WEXITSTATUS(status));
    if (WIFSIGNALED(status)) return "killed by signal " + std::to_string(WTERMSIG(status));
    return "terminated";
  }

  void kill_now() {
    if (pid >= 0) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, nullptr, 0);
      pid = -1;
    }
    close_fds();
  }

  void close_fds() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    to_child = from_child = -1;
  }

  void stop() {
    if (pid < 0) return;
    close_fds();  // EOF on stdin asks the child to finish
    reap();
  }
};

ChildProcessModel::ChildProcessModel(std::string command, ExternalOptions options)
    : command_(std::move(command)), options_(std::move(options)), impl_(std::make_unique<Impl>()) {}

ChildProcessModel::~ChildProcessModel() = default;

void ChildProcessModel::open() {
  ignore_sigpipe();
  if (impl_->pid < 0) impl_->spawn(command_);
}

double ChildProcessModel::predict(const ExecutionRequest& request) {
  ignore_sigpipe();
  if (impl_->pid < 0) {
    try {
      impl_->spawn(command_);
    } catch (const SutUnreachable& e) {
      throw SutCrashed(std::string("respawn failed: ") + e.what());
    }
  }
  return run_exchange(options_, request, [&](const std::string& line, const std::string& id) {
    try {
      impl_->channel.send_line(line, false);
      const auto reply = impl_->channel.read_line(Clock::now() + options_.timeout);
      ProtocolResponse resp = decode_response(reply);
      if (resp.id != id) {
        impl_->kill_now();
        throw ProtocolError("response id '" + resp.id + "' does not match request '" + id + "'");
      }
      return resp;
    } catch (const Timeout&) {
      impl_->kill_now();
      throw;
    } catch (const SutCrashed& e) {
      throw SutCrashed(std::string(e.what()) + "; child " + impl_->reap());
    }
  });
}

struct NetworkModel::Impl {
  int fd = -1;
  LineChannel channel;

  ~Impl() { disconnect(); }

  void disconnect() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }

  void connect_to(const std::string& host, int port, std::chrono::milliseconds timeout) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port_s = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_s.c_str(), &hints, &res); rc != 0)
      throw SutUnreachable("cannot resolve " + host + ": " + ::gai_strerror(rc));
    std::string last_error = "no addresses";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      const int s = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
      if (s < 0) continue;
      int rc = ::connect(s, ai->ai_addr, ai->ai_addrlen);
      if (rc != 0 && errno == EINPROGRESS) {
        pollfd pfd{s, POLLOUT, 0};
        rc = ::poll(&pfd, 1, static_cast<int>(timeout.count())) == 1 ? 0 : -1;
        int err = 0;
        socklen_t len = sizeof err;
        if (rc == 0 && (::getsockopt(s, SOL_SOCKET, SO_ERROR, &err, &len) != 0 || err != 0)) {
          errno = err;
          rc = -1;
        }
      }
      if (rc == 0) {
        ::fcntl(s, F_SETFL, ::fcntl(s, F_GETFL) & ~O_NONBLOCK);
        fd = s;
        break;
      }
      last_error = std::strerror(errno);
      ::close(s);
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw SutUnreachable("cannot connect to " + host + ":" + port_s + ": " + last_error);
    channel.reset(fd, fd);
  }
};

NetworkModel::NetworkModel(std::string host, int port, ExternalOptions options)
    : host_(std::move(host)), port_(port), options_(std::move(options)), impl_(std::make_unique<Impl>()) {}

NetworkModel::~NetworkModel() = default;

std::string NetworkModel::name() const { return "net:" + host_ + ":" + std::to_string(port_); }

void NetworkModel::open() {
  ignore_sigpipe();
  if (impl_->fd < 0) impl_->connect_to(host_, port_, options_.timeout);
}

double NetworkModel::predict(const ExecutionRequest& request) {
  if (impl_->fd < 0) {
    try {
      impl_->connect_to(host_, port_, options_.timeout);
    } catch (const SutUnreachable& e) {
      throw SutCrashed(std::string("reconnect failed: ") + e.what());
    }
  }
  return run_exchange(options_, request, [&](const std::string& line, const std::string& id) {
    try {
      impl_->channel.send_line(line, true);
      ProtocolResponse resp = decode_response(impl_->channel.read_line(Clock::now() + options_.timeout));
      if (resp.id != id) {
        impl_->disconnect();
        throw ProtocolError("response id '" + resp.id + "' does not match request '" + id + "'");
      }
      return resp;
    } catch (const Timeout&) {
      impl_->disconnect();
      throw;
    } catch (const SutCrashed&) {
      impl_->disconnect();
      throw;
    }
  });
}

std::unique_ptr<SteeringModel> make_model(const SutDescriptor& d, const std::filesystem::path& scratch_dir) {
  d.validate();
  const ExternalOptions opts{scratch_dir, std::chrono::milliseconds(d.timeout_ms)};
  switch (d.kind) {
    case SutKind::InProcessStub:
      if (d.target == "constant-zero") return std::make_unique<ConstantZeroStub>();
      if (d.target == "brightness-centroid") return std::make_unique<BrightnessCentroidStub>(d.gain);
      return std::make_unique<ScriptedStub>(ScriptedStub::load(*d.script));
    case SutKind::ChildProcess:
      return std::make_unique<ChildProcessModel>(d.target, opts);
    case SutKind::Network: {
      const auto colon = d.target.rfind(':');
      int port = 0;
      try {
        port = std::stoi(d.target.substr(colon + 1));
      } catch (const std::exception&) {
        throw InvalidValue("bad port in '" + d.target + "'");
      }
      return std::make_unique<NetworkModel>(d.target.substr(0, colon), port, opts);
    }
  }
  throw InvalidValue("unknown SUT kind");
}

SutLane::SutLane(std::unique_ptr<SteeringModel> model, ClampPolicy policy)
    : model_(std::move(model)), policy_(policy) {}

SteeringAngle SutLane::execute(const ExecutionRequest& request) {
  const auto start = Clock::now();
  double raw = 0.0;
  try {
    raw = model_->predict(request);
  } catch (...) {
    latencies_.push_back({request.frame_id, request.config_label,
                          std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
    throw;
  }
  latencies_.push_back({request.frame_id, request.config_label,
                        std::chrono::duration<double, std::milli>(Clock::now() - start).count()});
  if (!std::isfinite(raw)) throw ProtocolError("SUT returned a non-finite angle");
  if (raw < -1.0 || raw > 1.0) {
    if (policy_ == ClampPolicy::Reject)
      throw SutRejected("steering angle " + std::to_string(raw) + " outside [-1, 1]");
    ++clamped_;
    std::cerr << "warning: clamping steering angle " << raw << " for frame " << request.frame_id << " / "
              << request.config_label << "\n";
    return SteeringAngle::clamped(raw);
  }
  return SteeringAngle(raw);
}

}  // namespace smart
