// Noisy-parity responder speaking the line protocol over stdio, or over HTTP
// (POST /respond) with --port.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>

#include "telm/endpoint.hpp"
#include "telm/oracles.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Noisy-parity reference responder"};
  std::uint64_t seed = 0;
  double accuracy = 1.0;
  std::string curve_file;
  int min_length = 1;
  int max_length = 4096;
  int fail_every = 0;
  int port = -1;
  std::string host = "127.0.0.1";
  app.add_option("--seed", seed, "noise seed");
  app.add_option("--accuracy", accuracy, "constant accuracy when no curve is given");
  app.add_option("--curve", curve_file, "accuracy curve JSON");
  app.add_option("--min-length", min_length);
  app.add_option("--max-length", max_length);
  app.add_option("--fail-every", fail_every, "answer every k-th request with an error");
  app.add_option("--port", port, "serve HTTP on this port instead of stdio (0: pick one)");
  app.add_option("--host", host);
  CLI11_PARSE(app, argc, argv);

  telm::oracles::NoisyParitySpec spec;
  spec.seed = seed;
  try {
    if (!curve_file.empty()) {
      std::ifstream in(curve_file);
      spec.curve = telm::oracles::AccuracyCurve::from_json(nlohmann::json::parse(in));
    } else {
      spec.curve = telm::oracles::AccuracyCurve::constant(min_length, max_length, accuracy);
    }
  } catch (const std::exception& e) {
    std::cerr << "telm-oracle: " << e.what() << "\n";
    return 2;
  }

  std::uint64_t served = 0;
  auto respond = [&](const telm::Request& r) -> std::string {
    ++served;
    if (fail_every > 0 && served % static_cast<std::uint64_t>(fail_every) == 0) {
      throw std::runtime_error("injected failure");
    }
    return telm::oracles::noisy_parity_respond(spec, r.prompt, static_cast<std::uint64_t>(r.repeat));
  };

  if (port >= 0) {
    httplib::Server server;
    std::mutex mu;
    server.set_tcp_nodelay(true);
    server.Post("/respond", [&](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(mu);
      res.set_content(telm::handle_request_line(req.body, respond) + "\n", "application/json");
    });
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("telm-oracle\n", "text/plain");
    });
    const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (bound < 0) {
      std::cerr << "telm-oracle: cannot bind " << host << ":" << port << "\n";
      return 3;
    }
    std::cout << "listening " << bound << std::endl;
    server.listen_after_bind();
    return 0;
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    std::cout << telm::handle_request_line(line, respond) << '\n' << std::flush;
  }
  return 0;
}
