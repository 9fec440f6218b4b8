#include "tracemark/gateway.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <json.hpp>

#include "tracemark/digest.hpp"
#include "tracemark/error.hpp"
#include "tracemark/media.hpp"

namespace tracemark::gateway {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::pair<std::string, std::string> split_address(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) fail(ErrorCode::kInvalidInput, "address must be host:port, got " + address);
  std::string host = address.substr(0, colon);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']') host = host.substr(1, host.size() - 2);
  return {host.empty() ? "0.0.0.0" : host, address.substr(colon + 1)};
}

std::string error_line(const std::optional<std::string>& request_id, std::string_view code) {
  OrderedJson j;
  if (request_id) j["request_id"] = *request_id;
  j["error_code"] = code;
  return j.dump();
}

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

int remaining_ms(Clock::time_point deadline) {
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
  return left <= 0 ? 0 : static_cast<int>(left);
}

}  // namespace

std::string InferRequest::to_line() const {
  OrderedJson j;
  j["request_id"] = request_id;
  j["credential"] = credential;
  j["key_image"] = key_image_b64;
  j["query_image"] = query_image_b64;
  return j.dump();
}

std::string InferResponse::to_line() const {
  OrderedJson j;
  j["request_id"] = request_id;
  j["class"] = class_index;
  return j.dump();
}

InferRequest make_request(std::string request_id, std::string credential, const RgbImage& key_image,
                          const RgbImage& query_image) {
  InferRequest r;
  r.request_id = std::move(request_id);
  r.credential = std::move(credential);
  r.key_image_b64 = digest::base64_encode(media::encode_ppm(key_image));
  r.query_image_b64 = digest::base64_encode(media::encode_ppm(query_image));
  return r;
}

std::string handle_line(const ServiceState& state, std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::exception&) {
    return error_line(std::nullopt, "bad_json");
  }
  if (!j.is_object()) return error_line(std::nullopt, "bad_json");

  std::optional<std::string> request_id;
  if (auto it = j.find("request_id"); it != j.end() && it->is_string()) request_id = it->get<std::string>();
  if (!request_id) return error_line(std::nullopt, "bad_request");
  for (const char* field : {"credential", "key_image", "query_image"}) {
    auto it = j.find(field);
    if (it == j.end() || !it->is_string()) return error_line(request_id, "bad_request");
  }
  const std::string credential = j["credential"].get<std::string>();
  if (credential.size() != acpt::kCredentialLength) return error_line(request_id, "bad_request");

  RgbImage key, query;
  try {
    key = media::decode_pnm(digest::base64_decode(j["key_image"].get<std::string>()));
    query = media::decode_pnm(digest::base64_decode(j["query_image"].get<std::string>()));
  } catch (const Error&) {
    return error_line(request_id, "bad_image");
  }

  InferResponse response;
  response.request_id = *request_id;
  response.class_index = acpt::authorize(state.center, state.model, credential, key, query,
                                         acpt::request_seed(state.seed, *request_id));
  return response.to_line();
}

// ---- service -------------------------------------------------------------------

Service::Service(int listen_fd, std::string host, std::uint16_t port, std::shared_ptr<const ServiceState> state)
    : listen_fd_(listen_fd), host_(std::move(host)), port_(port), state_(std::move(state)) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

std::unique_ptr<Service> Service::start(const std::string& bind_address, std::shared_ptr<const ServiceState> state) {
  const auto [host, port] = split_address(bind_address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    fail(ErrorCode::kStartup, "cannot resolve bind address " + bind_address + ": " + ::gai_strerror(rc));
  }
  int fd = -1;
  std::string last_error = "no usable address";
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 128) == 0) break;
    last_error = std::strerror(errno);
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) fail(ErrorCode::kStartup, "cannot bind " + bind_address + ": " + last_error);

  sockaddr_storage addr{};
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const std::uint16_t bound = addr.ss_family == AF_INET6
                                  ? ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port)
                                  : ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  return std::unique_ptr<Service>(new Service(fd, host, bound, std::move(state)));
}

Service::~Service() { stop(); }

std::string Service::address() const {
  const std::string host = host_ == "0.0.0.0" ? "127.0.0.1" : host_;
  return (host.find(':') != std::string::npos ? "[" + host + "]" : host) + ":" + std::to_string(port_);
}

void Service::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  ::close(listen_fd_);
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
}

void Service::accept_loop() {
  while (!stopping_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, 200);
    if (rc <= 0) continue;
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    open_fds_.push_back(fd);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Service::serve_connection(int fd) {
  std::string buffer;
  bool discarding = false;  // inside an oversized line
  char chunk[64 * 1024];
  while (!stopping_) {
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    bool ok = true;
    std::size_t start = 0;
    for (std::size_t nl; ok && (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      if (discarding) {
        discarding = false;
        continue;
      }
      const std::string_view line(buffer.data() + start, nl - start);
      if (line.size() > kMaxLineBytes) {
        ok = send_all(fd, error_line(std::nullopt, "line_too_long") + "\n");
        continue;
      }
      if (line.empty() || line == "\r") continue;
      std::string reply;
      try {
        reply = handle_line(*state_, line);
      } catch (const Error&) {
        reply = error_line(std::nullopt, "bad_request");
      }
      ok = send_all(fd, reply + "\n");
    }
    if (!ok) break;
    buffer.erase(0, start);
    if (!discarding && buffer.size() > kMaxLineBytes) {
      if (!send_all(fd, error_line(std::nullopt, "line_too_long") + "\n")) break;
      discarding = true;
      buffer.clear();
    } else if (discarding) {
      buffer.clear();
    }
  }
  std::lock_guard lock(mu_);
  std::erase(open_fds_, fd);
  ::close(fd);
}

std::unique_ptr<Service> serve(const std::string& bind_address, acpt::AuthorizationCenter center,
                               nn::ModelSnapshot model, std::uint64_t seed) {
  model.layer_shapes();
  auto state = std::make_shared<ServiceState>();
  state->center = std::move(center);
  state->model = std::move(model);
  state->seed = seed;
  return Service::start(bind_address, std::move(state));
}

// ---- client --------------------------------------------------------------------

Client::Client(const std::string& address, std::chrono::milliseconds timeout) : timeout_(timeout) {
  const auto deadline = Clock::now() + timeout_;
  const auto [host, port] = split_address(address);
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0) {
    fail(ErrorCode::kTransport, "cannot resolve " + address + ": " + ::gai_strerror(rc));
  }
  std::string last_error = "no usable address";
  for (addrinfo* ai = res; ai && fd_ < 0; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC | SOCK_NONBLOCK, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) != 0) {
      if (errno != EINPROGRESS) {
        last_error = std::strerror(errno);
        ::close(fd);
        continue;
      }
      pollfd p{fd, POLLOUT, 0};
      const int rc = ::poll(&p, 1, remaining_ms(deadline));
      int err = 0;
      socklen_t len = sizeof err;
      if (rc <= 0) {
        last_error = rc == 0 ? "connect timed out" : std::strerror(errno);
        ::close(fd);
        continue;
      }
      ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
      if (err != 0) {
        last_error = std::strerror(err);
        ::close(fd);
        continue;
      }
    }
    fd_ = fd;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) fail(ErrorCode::kTransport, "cannot connect to " + address + ": " + last_error);
  int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

std::string Client::round_trip(std::string_view line) {
  const auto deadline = Clock::now() + timeout_;
  std::string out(line);
  out.push_back('\n');
  std::string_view pending(out);
  while (!pending.empty()) {
    const ssize_t n = ::send(fd_, pending.data(), pending.size(), MSG_NOSIGNAL);
    if (n > 0) {
      pending.remove_prefix(static_cast<std::size_t>(n));
      continue;
    }
    if (n < 0 && errno != EAGAIN && errno != EWOULDBLOCK && errno != EINTR) {
      fail(ErrorCode::kTransport, std::string("send failed: ") + std::strerror(errno));
    }
    pollfd p{fd_, POLLOUT, 0};
    if (::poll(&p, 1, remaining_ms(deadline)) <= 0) fail(ErrorCode::kTransport, "send timed out");
  }
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string reply = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return reply;
    }
    pollfd p{fd_, POLLIN, 0};
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc == 0) fail(ErrorCode::kTransport, "response timed out");
    if (rc < 0 && errno != EINTR) fail(ErrorCode::kTransport, std::string("poll failed: ") + std::strerror(errno));
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n == 0) fail(ErrorCode::kTransport, "connection closed before a response arrived");
    if (n < 0) {
      if (errno == EAGAIN || errno == EWOULDBLOCK || errno == EINTR) continue;
      fail(ErrorCode::kTransport, std::string("recv failed: ") + std::strerror(errno));
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

InferResponse Client::infer(const InferRequest& request) {
  const std::string reply = round_trip(request.to_line());
  Json j;
  try {
    j = Json::parse(reply);
  } catch (const Json::exception&) {
    fail(ErrorCode::kProtocol, "response is not JSON");
  }
  if (j.contains("error_code")) {
    fail(ErrorCode::kProtocol, "service rejected request: " + j["error_code"].dump());
  }
  const auto id = j.find("request_id");
  const auto cls = j.find("class");
  if (j.size() != 2 || id == j.end() || !id->is_string() || cls == j.end() || !cls->is_number_integer()) {
    fail(ErrorCode::kProtocol, "malformed response: " + reply);
  }
  InferResponse r;
  r.request_id = id->get<std::string>();
  r.class_index = cls->get<int>();
  if (r.request_id != request.request_id) fail(ErrorCode::kProtocol, "response request_id does not match");
  return r;
}

InferResponse client_infer(const std::string& address, const InferRequest& request,
                           std::chrono::milliseconds timeout) {
  Client c(address, timeout);
  return c.infer(request);
}

}  // namespace tracemark::gateway
