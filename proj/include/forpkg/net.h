#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "forpkg/error.h"

namespace forpkg::net {

// Process-wide switch. When set, every outbound request fails with
// NetworkForbidden before a socket is opened. FORPKG_FORBID_NETWORK=1 in the
// environment sets it at startup.
void set_network_forbidden(bool forbidden);
bool network_forbidden();
void require_network(std::string_view what);

// FORPKG_LOOPBACK_ONLY=1 refuses every host except localhost, 127.0.0.0/8
// and ::1.
bool is_loopback_origin(std::string_view origin);

// Sets the switch for the guard's lifetime.
class NetworkGuard {
 public:
  NetworkGuard();
  ~NetworkGuard();
  NetworkGuard(const NetworkGuard&) = delete;
  NetworkGuard& operator=(const NetworkGuard&) = delete;

 private:
  bool previous_;
};

// "http://host:port/base" -> origin "http://host:port", base path "/base".
struct Endpoint {
  std::string origin;
  std::string base_path;
};
Endpoint parse_endpoint(std::string_view url);  // throws InvalidConfig

// Spaces calls at least 1/rate seconds apart. rate <= 0 disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double calls_per_second = 0.0);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

struct RetryPolicy {
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{4000};
};

struct HttpOptions {
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry;
  std::map<std::string, std::string> headers;
  RateLimiter* limiter = nullptr;
  // Error code raised when every attempt fails.
  ErrorCode failure_code = ErrorCode::kClientError;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Connection failures, 429 and 5xx are retried with exponential backoff;
// other statuses are returned to the caller.
HttpResponse post_json(const Endpoint& endpoint, const std::string& path,
                       const nlohmann::json& body, const HttpOptions& options);
HttpResponse get(const Endpoint& endpoint, const std::string& path,
                 const HttpOptions& options);

}  // namespace forpkg::net
