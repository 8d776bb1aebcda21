#ifndef TELM_ENDPOINT_HPP
#define TELM_ENDPOINT_HPP

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace telm {

// Wire protocol, one JSON object per line:
//   request  {"id": string, "prompt": string, "repeat": int}
//   response {"id": string, "output": string} | {"id": string, "error": string}
struct Request {
  std::string id;
  std::string prompt;
  int repeat = 0;
};

struct Reply {
  std::optional<std::string> output;
  std::optional<std::string> error;
  // True when no protocol reply arrived at all (connection, timeout, crash).
  bool transport_failure = false;

  static Reply ok(std::string out) { return {std::move(out), std::nullopt, false}; }
  static Reply fail(std::string msg, bool transport = false) {
    return {std::nullopt, std::move(msg), transport};
  }
};

std::string encode_request(const Request& r);
Reply decode_reply(const std::string& line, const std::string& expected_id);
// Server side of the protocol. A malformed line answers with id "unknown".
std::string handle_request_line(const std::string& line,
                                const std::function<std::string(const Request&)>& respond);

class EndpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One logical connection; used by a single dispatcher thread at a time.
class ModelEndpoint {
 public:
  virtual ~ModelEndpoint() = default;
  // Throws EndpointError when the endpoint cannot be reached at all.
  virtual void check() {}
  virtual Reply query(const Request& request) = 0;
};

using EndpointFactory = std::function<std::unique_ptr<ModelEndpoint>()>;

enum class Transport { in_process, subprocess, http };

struct EndpointConfig {
  Transport transport = Transport::in_process;
  std::string address;  // command line, base URL or oracle spec
  std::chrono::milliseconds timeout{10000};
  int max_in_flight = 1;

  void validate() const;
  nlohmann::json to_json() const;
  static EndpointConfig from_json(const nlohmann::json& j);
  // "http://host:port", "subprocess:<command>" or "oracle:<spec>".
  static EndpointConfig from_uri(const std::string& uri);
};

using Respond = std::function<std::string(const Request&)>;

// Calls `respond` directly; exceptions become error replies.
EndpointFactory in_process_endpoint(Respond respond);

// Spawns `/bin/sh -c command` per connection and talks over its stdio.
// A timed-out or crashed child is killed and restarted on the next query.
EndpointFactory subprocess_endpoint(std::string command, std::chrono::milliseconds timeout);

// POST <base_url>/respond with the request body, one request per sample.
EndpointFactory http_endpoint(std::string base_url, std::chrono::milliseconds timeout);

}  // namespace telm

#endif  // TELM_ENDPOINT_HPP
