#include <httplib.h>

#include "telm/endpoint.hpp"

namespace telm {

namespace {

class HttpEndpoint final : public ModelEndpoint {
 public:
  HttpEndpoint(const std::string& base_url, std::chrono::milliseconds timeout)
      : client_(base_url), base_url_(base_url) {
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client_.set_connection_timeout(secs, usecs);
    client_.set_read_timeout(secs, usecs);
    client_.set_write_timeout(secs, usecs);
    client_.set_keep_alive(true);
    client_.set_tcp_nodelay(true);
  }

  void check() override {
    if (!client_.is_valid()) throw EndpointError("invalid endpoint URL: " + base_url_);
    // Any HTTP answer proves the server is up; only connection failures count.
    const auto res = client_.Get("/");
    if (!res && res.error() != httplib::Error::Read) {
      throw EndpointError("cannot reach " + base_url_ + ": " + httplib::to_string(res.error()));
    }
  }

  Reply query(const Request& request) override {
    const auto res = client_.Post("/respond", encode_request(request), "application/json");
    if (!res) {
      const auto err = res.error();
      return Reply::fail(err == httplib::Error::Read ? "timeout"
                                                     : "transport: " + httplib::to_string(err),
                         true);
    }
    if (res->status != 200) {
      // Error bodies may still carry a protocol error object.
      const Reply r = decode_reply(res->body, request.id);
      if (r.error && r.error->rfind("protocol:", 0) != 0) return r;
      return Reply::fail("http status " + std::to_string(res->status));
    }
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return decode_reply(body, request.id);
  }

 private:
  httplib::Client client_;
  std::string base_url_;
};

}  // namespace

EndpointFactory http_endpoint(std::string base_url, std::chrono::milliseconds timeout) {
  return [base_url = std::move(base_url), timeout] {
    return std::make_unique<HttpEndpoint>(base_url, timeout);
  };
}

}  // namespace telm
