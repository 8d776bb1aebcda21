#include "telm/endpoint.hpp"

#include <csignal>
#include <cerrno>
#include <cstring>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "telm/plan.hpp"

namespace telm {

std::string encode_request(const Request& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["prompt"] = r.prompt;
  j["repeat"] = r.repeat;
  return j.dump();
}

Reply decode_reply(const std::string& line, const std::string& expected_id) {
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return Reply::fail("protocol: malformed reply");
  if (!j.contains("id") || !j["id"].is_string()) return Reply::fail("protocol: reply without id");
  if (j["id"].get<std::string>() != expected_id) return Reply::fail("protocol: reply id mismatch");
  if (j.contains("error")) {
    return Reply::fail(j["error"].is_string() ? j["error"].get<std::string>() : j["error"].dump());
  }
  if (!j.contains("output") || !j["output"].is_string()) {
    return Reply::fail("protocol: reply without output");
  }
  return Reply::ok(j["output"].get<std::string>());
}

std::string handle_request_line(const std::string& line,
                                const std::function<std::string(const Request&)>& respond) {
  nlohmann::ordered_json out;
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string() ||
      !j.contains("prompt") || !j["prompt"].is_string()) {
    out["id"] = j.is_object() && j.contains("id") && j["id"].is_string()
                    ? j["id"].get<std::string>()
                    : std::string("unknown");
    out["error"] = "malformed request";
    return out.dump();
  }
  Request req{j["id"].get<std::string>(), j["prompt"].get<std::string>(),
              j.value("repeat", 0)};
  out["id"] = req.id;
  try {
    out["output"] = respond(req);
  } catch (const std::exception& e) {
    out["error"] = e.what();
  }
  return out.dump();
}

void EndpointConfig::validate() const {
  if (timeout.count() <= 0) throw ConfigError("endpoint: timeout must be positive");
  if (max_in_flight < 1) throw ConfigError("endpoint: max_in_flight must be >= 1");
  if (address.empty()) throw ConfigError("endpoint: empty address");
}

nlohmann::json EndpointConfig::to_json() const {
  const char* t = transport == Transport::http         ? "http"
                  : transport == Transport::subprocess ? "subprocess"
                                                       : "oracle";
  return {{"transport", t},
          {"address", address},
          {"timeout_ms", timeout.count()},
          {"max_in_flight", max_in_flight}};
}

EndpointConfig EndpointConfig::from_json(const nlohmann::json& j) {
  EndpointConfig c;
  const std::string t = j.value("transport", std::string("oracle"));
  if (t == "http") {
    c.transport = Transport::http;
  } else if (t == "subprocess") {
    c.transport = Transport::subprocess;
  } else if (t == "oracle" || t == "in-process") {
    c.transport = Transport::in_process;
  } else {
    throw ConfigError("endpoint: unknown transport '" + t + "'");
  }
  c.address = j.value("address", std::string());
  c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 10000));
  c.max_in_flight = j.value("max_in_flight", 1);
  c.validate();
  return c;
}

EndpointConfig EndpointConfig::from_uri(const std::string& uri) {
  EndpointConfig c;
  if (uri.rfind("http://", 0) == 0) {
    c.transport = Transport::http;
    c.address = uri;
  } else if (uri.rfind("subprocess:", 0) == 0) {
    c.transport = Transport::subprocess;
    c.address = uri.substr(11);
  } else if (uri.rfind("oracle:", 0) == 0) {
    c.transport = Transport::in_process;
    c.address = uri.substr(7);
  } else {
    throw ConfigError("endpoint: cannot parse '" + uri +
                      "' (expected http://, subprocess: or oracle:)");
  }
  c.validate();
  return c;
}

namespace {

class InProcessEndpoint final : public ModelEndpoint {
 public:
  explicit InProcessEndpoint(std::shared_ptr<const Respond> respond) : respond_(std::move(respond)) {}

  Reply query(const Request& request) override {
    try {
      return Reply::ok((*respond_)(request));
    } catch (const std::exception& e) {
      return Reply::fail(e.what());
    }
  }

 private:
  std::shared_ptr<const Respond> respond_;
};

class SubprocessEndpoint final : public ModelEndpoint {
 public:
  SubprocessEndpoint(std::string command, std::chrono::milliseconds timeout)
      : command_(std::move(command)), timeout_(timeout) {}
  ~SubprocessEndpoint() override { stop(); }

  SubprocessEndpoint(const SubprocessEndpoint&) = delete;
  SubprocessEndpoint& operator=(const SubprocessEndpoint&) = delete;

  void check() override {
    spawn();
    // A child that cannot start (bad command) exits at once and closes its stdout.
    pollfd pfd{from_child_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) > 0 && (pfd.revents & (POLLHUP | POLLERR)) && !(pfd.revents & POLLIN)) {
      stop();
      throw EndpointError("subprocess endpoint exited immediately: " + command_);
    }
  }

  Reply query(const Request& request) override {
    if (pid_ < 0) spawn();
    const std::string line = encode_request(request) + "\n";
    if (!write_all(line)) {
      stop();
      return Reply::fail("transport: subprocess closed its input", true);
    }
    std::string reply;
    switch (read_line(reply)) {
      case ReadStatus::ok: return decode_reply(reply, request.id);
      case ReadStatus::timeout:
        stop();
        return Reply::fail("timeout", true);
      case ReadStatus::eof: break;
    }
    stop();
    return Reply::fail("transport: subprocess exited", true);
  }

 private:
  enum class ReadStatus { ok, timeout, eof };

  void spawn() {
    if (pid_ >= 0) return;
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EndpointError("pipe failed");
    if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw EndpointError("pipe failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw EndpointError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
      ::setpgid(0, 0);  // own group, so stop() also reaches grandchildren
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
  }

  void stop() {
    if (pid_ < 0) return;
    ::close(to_child_);
    ::close(from_child_);
    to_child_ = from_child_ = -1;
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 50 && !reaped; ++i) {
      reaped = ::waitpid(pid_, &status, WNOHANG) == pid_;
      if (!reaped) std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ::kill(-pid_, SIGKILL);
    if (!reaped) ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  bool write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      const ssize_t n = ::write(to_child_, data.data() + off, data.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        return false;
      }
      off += static_cast<std::size_t>(n);
    }
    return true;
  }

  ReadStatus read_line(std::string& line) {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return ReadStatus::ok;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) return ReadStatus::timeout;
      pollfd pfd{from_child_, POLLIN, 0};
      const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (rc < 0 && errno == EINTR) continue;
      if (rc == 0) return ReadStatus::timeout;
      char chunk[4096];
      const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return ReadStatus::eof;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  std::string command_;
  std::chrono::milliseconds timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace

EndpointFactory in_process_endpoint(Respond respond) {
  auto shared = std::make_shared<const Respond>(std::move(respond));
  return [shared] { return std::make_unique<InProcessEndpoint>(shared); };
}

EndpointFactory subprocess_endpoint(std::string command, std::chrono::milliseconds timeout) {
  std::signal(SIGPIPE, SIG_IGN);
  return [command = std::move(command), timeout] {
    return std::make_unique<SubprocessEndpoint>(command, timeout);
  };
}

}  // namespace telm
