#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/json_io.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

class EventLog;

struct ChatRequest {
  std::string endpoint;  // base URL, e.g. http://127.0.0.1:8080/v1
  std::string model;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
};

/// Throws PreconditionError when messages are empty, roles do not alternate
/// after an optional system prefix, temperature < 0 or max_tokens <= 0.
void validate(const ChatRequest& req);

/// Body sent to <endpoint>/chat/completions.
json request_body(const ChatRequest& req);

struct ChatResponse {
  std::string content;
  bool cached = false;
  std::int64_t latency_ms = 0;
};

/// Stable SHA-256 over endpoint, model, messages, temperature, max_tokens
/// and seed. Computed from canonical (sorted-key) JSON.
std::string cache_key(const ChatRequest& req);

class GatewayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-retryable 4xx.
class RequestError : public GatewayError {
 public:
  RequestError(int status, std::string body);
  int status() const { return status_; }
  const std::string& body() const { return body_; }

 private:
  int status_;
  std::string body_;
};

/// Retries exhausted or connection never established.
class TransportError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

/// Response body did not contain choices[0].message.content.
class ProtocolError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

struct HttpResult {
  int status = 0;  // 0 = connection failure or timeout
  std::string body;
  std::string error;
};

/// Minimal POST abstraction so the gateway can be driven by a scripted
/// transport in tests as well as the real HTTP client.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult post_json(const std::string& url,
                               const std::map<std::string, std::string>& headers,
                               const std::string& body, std::chrono::milliseconds timeout) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport();

/// Content-addressed store of responses: <root>/<key[0:2]>/<key>.json.
/// Safe for concurrent readers and writers (atomic rename).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path root);
  std::optional<json> get(const std::string& key) const;
  void put(const std::string& key, const json& entry) const;
  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
  std::uint64_t seed = 0;
};

/// Delay before retry 1..n. Exponential with deterministic jitter in
/// [0.5, 1.0) drawn from the policy seed and the request key.
std::vector<std::chrono::milliseconds> backoff_schedule(const RetryPolicy& policy,
                                                        const std::string& request_key);

struct GatewayOptions {
  RetryPolicy retry;
  std::chrono::milliseconds timeout{120000};
  std::size_t concurrency = 4;
  /// Requests per second per endpoint; <= 0 disables the limiter.
  double rate_limit_rps = 0.0;
  /// Endpoint base URL -> API key (resolved from env by the caller).
  std::map<std::string, std::string> api_keys;
  /// Refuse network calls; cache misses raise TransportError.
  bool offline = false;
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayCounters {
  std::uint64_t network_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t retries = 0;
};

/// Sole egress point to chat-completion services. Thread-safe.
class LlmGateway {
 public:
  LlmGateway(GatewayOptions options, std::shared_ptr<ResponseCache> cache,
             std::unique_ptr<HttpTransport> transport = make_http_transport());
  ~LlmGateway();

  ChatResponse chat_complete(const ChatRequest& req);

  /// POSTs an arbitrary JSON body through the same cache, limiter and retry
  /// path. Used for the hidden-state extraction service.
  json post_cached(const std::string& url, const json& body, const std::string& key);

  GatewayCounters counters() const;
  void set_log(EventLog* log) { log_ = log; }
  const GatewayOptions& options() const { return options_; }

 private:
  HttpResult send_with_retries(const std::string& url, const std::string& api_key,
                               const std::string& body, const std::string& key,
                               std::int64_t& backoff_ms);
  void acquire_slot(const std::string& endpoint);
  void release_slot();

  GatewayOptions options_;
  std::shared_ptr<ResponseCache> cache_;
  std::unique_ptr<HttpTransport> transport_;
  EventLog* log_ = nullptr;

  std::mutex mu_;
  std::condition_variable slots_cv_;
  std::size_t in_flight_ = 0;
  std::map<std::string, std::chrono::steady_clock::time_point> next_allowed_;

  std::atomic<std::uint64_t> network_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> retries_{0};
};

/// Splits "http://host:port/base" into scheme+authority and path prefix.
struct ParsedUrl {
  std::string origin;  // http://host:port
  std::string path;    // /base
};
ParsedUrl parse_url(const std::string& url);

}  // namespace ssbc
