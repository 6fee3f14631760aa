#include "forpkg/net.h"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace forpkg::net {

namespace {

std::atomic<bool>& forbidden_flag() {
  static std::atomic<bool> flag = [] {
    const char* env = std::getenv("FORPKG_FORBID_NETWORK");
    return env != nullptr && std::string_view(env) == "1";
  }();
  return flag;
}

bool loopback_only() {
  static const bool flag = [] {
    const char* env = std::getenv("FORPKG_LOOPBACK_ONLY");
    return env != nullptr && std::string_view(env) == "1";
  }();
  return flag;
}

std::string_view host_of(std::string_view origin) {
  if (const auto at = origin.find("://"); at != std::string_view::npos) {
    origin.remove_prefix(at + 3);
  }
  if (!origin.empty() && origin.front() == '[') {
    return origin.substr(1, origin.find(']') - 1);
  }
  return origin.substr(0, origin.find(':'));
}

}  // namespace

bool is_loopback_origin(std::string_view origin) {
  const auto host = host_of(origin);
  return host == "localhost" || host == "::1" || host.rfind("127.", 0) == 0;
}

void set_network_forbidden(bool forbidden) { forbidden_flag() = forbidden; }

bool network_forbidden() { return forbidden_flag(); }

void require_network(std::string_view what) {
  if (network_forbidden()) {
    throw Error(ErrorCode::kNetworkForbidden,
                "network access attempted by " + std::string(what));
  }
}

NetworkGuard::NetworkGuard() : previous_(forbidden_flag().exchange(true)) {}

NetworkGuard::~NetworkGuard() { forbidden_flag() = previous_; }

Endpoint parse_endpoint(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidConfig,
                "endpoint '" + std::string(url) + "' lacks a scheme");
  }
  const std::string_view scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCode::kInvalidConfig,
                "endpoint scheme must be http or https: " + std::string(url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint ep;
  ep.origin = std::string(url.substr(0, path_start));
  if (path_start != std::string_view::npos) {
    ep.base_path = std::string(url.substr(path_start));
    while (!ep.base_path.empty() && ep.base_path.back() == '/') {
      ep.base_path.pop_back();
    }
  }
  if (ep.origin.size() <= scheme_end + 3) {
    throw Error(ErrorCode::kInvalidConfig,
                "endpoint '" + std::string(url) + "' lacks a host");
  }
  return ep;
}

RateLimiter::RateLimiter(double calls_per_second) {
  if (calls_per_second > 0) {
    interval_ = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
        std::chrono::duration<double>(1.0 / calls_per_second));
  }
}

void RateLimiter::acquire() {
  if (interval_ == std::chrono::steady_clock::duration::zero()) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

template <typename Send>
HttpResponse with_retries(const Endpoint& endpoint, const std::string& path,
                          const HttpOptions& options, Send send) {
  require_network(endpoint.origin + endpoint.base_path + path);
  if (loopback_only() && !is_loopback_origin(endpoint.origin)) {
    throw Error(ErrorCode::kNetworkForbidden,
                "non-loopback host refused: " + endpoint.origin);
  }
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(options.timeout);
  client.set_read_timeout(options.timeout);
  client.set_write_timeout(options.timeout);
  httplib::Headers headers(options.headers.begin(), options.headers.end());

  auto backoff = options.retry.initial_backoff;
  std::string last_error;
  const int attempts = std::max(1, options.retry.max_attempts);
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    if (options.limiter) options.limiter->acquire();
    auto result = send(client, endpoint.base_path + path, headers);
    if (result) {
      const int status = result->status;
      if (status != 429 && status < 500) return {status, result->body};
      last_error = "HTTP " + std::to_string(status);
    } else {
      last_error = httplib::to_string(result.error());
    }
    if (attempt < attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::min(
          options.retry.max_backoff,
          std::chrono::milliseconds(static_cast<long long>(
              static_cast<double>(backoff.count()) * options.retry.multiplier)));
    }
  }
  throw Error(options.failure_code, endpoint.origin + endpoint.base_path +
                                        path + " failed after " +
                                        std::to_string(attempts) +
                                        " attempt(s): " + last_error);
}

}  // namespace

HttpResponse post_json(const Endpoint& endpoint, const std::string& path,
                       const nlohmann::json& body, const HttpOptions& options) {
  const std::string payload = body.dump();
  return with_retries(endpoint, path, options,
                      [&](httplib::Client& c, const std::string& full,
                          const httplib::Headers& h) {
                        return c.Post(full, h, payload, "application/json");
                      });
}

HttpResponse get(const Endpoint& endpoint, const std::string& path,
                 const HttpOptions& options) {
  return with_retries(endpoint, path, options,
                      [](httplib::Client& c, const std::string& full,
                         const httplib::Headers& h) { return c.Get(full, h); });
}

}  // namespace forpkg::net
