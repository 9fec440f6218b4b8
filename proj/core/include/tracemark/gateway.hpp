#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "tracemark/acpt.hpp"
#include "tracemark/nn.hpp"

namespace tracemark::gateway {

inline constexpr std::size_t kMaxLineBytes = std::size_t{8} << 20;

// One NDJSON line per request. Images travel as base64 (standard alphabet,
// padded) PPM/PGM bytes.
struct InferRequest {
  std::string request_id;
  std::string credential;       // 8-character encrypted username
  std::string key_image_b64;
  std::string query_image_b64;

  std::string to_line() const;  // without trailing newline
};

struct InferResponse {
  std::string request_id;
  int class_index = 0;

  std::string to_line() const;  // {"request_id":...,"class":...}
};

InferRequest make_request(std::string request_id, std::string credential, const RgbImage& key_image,
                          const RgbImage& query_image);

// Immutable state shared by every connection.
struct ServiceState {
  acpt::AuthorizationCenter center;
  nn::ModelSnapshot model;
  std::uint64_t seed = 0;
};

/// Answers one request line: either an InferResponse line or an error
/// object {"request_id"?, "error_code"}. error_code is one of bad_json,
/// bad_request, bad_image, line_too_long.
std::string handle_line(const ServiceState& state, std::string_view line);

class Service {
 public:
  /// Binds `bind_address` ("host:port", port 0 picks a free one) and starts
  /// accepting. Throws kStartup if the address cannot be bound.
  static std::unique_ptr<Service> start(const std::string& bind_address, std::shared_ptr<const ServiceState> state);

  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  std::uint16_t port() const { return port_; }
  std::string address() const;  // host:port actually bound
  void stop();

 private:
  Service(int listen_fd, std::string host, std::uint16_t port, std::shared_ptr<const ServiceState> state);
  void accept_loop();
  void serve_connection(int fd);

  int listen_fd_;
  std::string host_;
  std::uint16_t port_;
  std::shared_ptr<const ServiceState> state_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::vector<int> open_fds_;
  std::vector<std::thread> workers_;
};

std::unique_ptr<Service> serve(const std::string& bind_address, acpt::AuthorizationCenter center,
                               nn::ModelSnapshot model, std::uint64_t seed);

// Single connection; requests on it are answered in order.
class Client {
 public:
  Client(const std::string& address, std::chrono::milliseconds timeout);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  /// Sends one line, returns the raw response line (no newline).
  std::string round_trip(std::string_view line);

  /// Throws kProtocol for error objects or malformed responses, kTransport
  /// on I/O failure or when the deadline passes.
  InferResponse infer(const InferRequest& request);

 private:
  int fd_ = -1;
  std::chrono::milliseconds timeout_;
  std::string buffer_;
};

InferResponse client_infer(const std::string& address, const InferRequest& request,
                           std::chrono::milliseconds timeout = std::chrono::seconds(10));

}  // namespace tracemark::gateway
