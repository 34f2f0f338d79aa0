#include "ssbc/llm_gateway.hpp"

#include <cmath>
#include <random>
#include <thread>

#include "ssbc/event_log.hpp"
#include "ssbc/hashing.hpp"

namespace ssbc {

namespace fs = std::filesystem;
using std::chrono::milliseconds;

void validate(const ChatRequest& req) {
  if (req.messages.empty()) throw PreconditionError("chat request has no messages");
  if (req.temperature < 0.0 || !std::isfinite(req.temperature)) {
    throw PreconditionError("temperature must be >= 0");
  }
  if (req.max_tokens <= 0) throw PreconditionError("max_tokens must be positive");
  std::size_t i = 0;
  if (req.messages.front().role == Role::system) i = 1;
  Role expected = Role::user;
  for (; i < req.messages.size(); ++i) {
    if (req.messages[i].role != expected) {
      throw PreconditionError("chat roles must alternate user/assistant after the system prefix");
    }
    expected = expected == Role::user ? Role::assistant : Role::user;
  }
}

json request_body(const ChatRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", req.model},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_tokens}};
  if (req.seed) body["seed"] = *req.seed;
  return body;
}

std::string cache_key(const ChatRequest& req) {
  json keyed = request_body(req);
  keyed["endpoint"] = req.endpoint;
  if (!req.seed) keyed["seed"] = nullptr;
  return sha256_hex(canonical_dump(keyed));
}

RequestError::RequestError(int status, std::string body)
    : GatewayError("HTTP " + std::to_string(status) + ": " + body), status_(status), body_(std::move(body)) {}

ResponseCache::ResponseCache(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

std::optional<json> ResponseCache::get(const std::string& key) const {
  const auto path = root_ / key.substr(0, 2) / (key + ".json");
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  try {
    return json::parse(read_file(path));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const json& entry) const {
  atomic_write(root_ / key.substr(0, 2) / (key + ".json"), canonical_dump(entry) + "\n");
}

std::vector<milliseconds> backoff_schedule(const RetryPolicy& policy, const std::string& request_key) {
  const auto key_bits = std::stoull(sha256_hex(request_key).substr(0, 16), nullptr, 16);
  std::mt19937_64 rng(policy.seed ^ key_bits);
  std::vector<milliseconds> out;
  for (int i = 0; i < policy.max_retries; ++i) {
    const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    const double exp_delay = static_cast<double>(policy.base_delay.count()) * std::ldexp(1.0, i);
    const double capped = std::min(exp_delay, static_cast<double>(policy.max_delay.count()));
    out.emplace_back(static_cast<milliseconds::rep>(std::llround(capped * (0.5 + 0.5 * unit))));
  }
  return out;
}

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw PreconditionError("endpoint URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl parsed;
  if (path_start == std::string::npos) {
    parsed.origin = url;
  } else {
    parsed.origin = url.substr(0, path_start);
    parsed.path = url.substr(path_start);
  }
  while (!parsed.path.empty() && parsed.path.back() == '/') parsed.path.pop_back();
  return parsed;
}

LlmGateway::LlmGateway(GatewayOptions options, std::shared_ptr<ResponseCache> cache,
                       std::unique_ptr<HttpTransport> transport)
    : options_(std::move(options)), cache_(std::move(cache)), transport_(std::move(transport)) {
  if (!options_.sleep) {
    options_.sleep = [](milliseconds d) { std::this_thread::sleep_for(d); };
  }
  if (options_.concurrency == 0) options_.concurrency = 1;
}

LlmGateway::~LlmGateway() = default;

GatewayCounters LlmGateway::counters() const {
  return {network_calls_.load(), cache_hits_.load(), retries_.load()};
}

void LlmGateway::acquire_slot(const std::string& endpoint) {
  std::chrono::steady_clock::time_point start_at;
  {
    std::unique_lock lock(mu_);
    slots_cv_.wait(lock, [&] { return in_flight_ < options_.concurrency; });
    ++in_flight_;
    const auto now = std::chrono::steady_clock::now();
    start_at = now;
    if (options_.rate_limit_rps > 0.0) {
      auto& next = next_allowed_[endpoint];
      start_at = std::max(now, next);
      next = start_at + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / options_.rate_limit_rps));
    }
  }
  std::this_thread::sleep_until(start_at);
}

void LlmGateway::release_slot() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  slots_cv_.notify_one();
}

namespace {
bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }
}  // namespace

HttpResult LlmGateway::send_with_retries(const std::string& url, const std::string& api_key,
                                         const std::string& body, const std::string& key,
                                         std::int64_t& backoff_ms) {
  std::map<std::string, std::string> headers;
  if (!api_key.empty()) headers["Authorization"] = "Bearer " + api_key;
  const auto schedule = backoff_schedule(options_.retry, key);
  for (int attempt = 0;; ++attempt) {
    auto result = transport_->post_json(url, headers, body, options_.timeout);
    ++network_calls_;
    if (log_) {
      log_->emit("http_post", {{"url", url}, {"key", key}, {"attempt", attempt}, {"status", result.status}, {"error", result.error}});
    }
    if (result.status >= 200 && result.status < 300) return result;
    if (!retryable(result.status)) throw RequestError(result.status, result.body);
    if (attempt >= options_.retry.max_retries) {
      throw TransportError("retries exhausted for " + url + " (last status " + std::to_string(result.status) +
                           (result.error.empty() ? "" : ", " + result.error) + ")");
    }
    const auto delay = schedule[static_cast<std::size_t>(attempt)];
    backoff_ms += delay.count();
    ++retries_;
    options_.sleep(delay);
  }
}

ChatResponse LlmGateway::chat_complete(const ChatRequest& req) {
  validate(req);
  const auto started = std::chrono::steady_clock::now();
  const auto key = cache_key(req);
  const auto elapsed = [&] {
    return std::chrono::duration_cast<milliseconds>(std::chrono::steady_clock::now() - started).count();
  };

  if (cache_) {
    if (auto hit = cache_->get(key); hit && hit->contains("content")) {
      ++cache_hits_;
      if (log_) log_->emit("cache_hit", {{"endpoint", req.endpoint}, {"model", req.model}, {"key", key}});
      return {hit->at("content").get<std::string>(), true, elapsed()};
    }
  }
  if (options_.offline) throw TransportError("offline mode: no cached response for request " + key);

  const auto body = request_body(req);
  const auto url = req.endpoint + (req.endpoint.ends_with('/') ? "" : "/") + "chat/completions";
  std::string api_key;
  if (auto it = options_.api_keys.find(req.endpoint); it != options_.api_keys.end()) api_key = it->second;

  std::int64_t backoff_ms = 0;
  HttpResult result;
  acquire_slot(req.endpoint);
  try {
    result = send_with_retries(url, api_key, canonical_dump(body), key, backoff_ms);
  } catch (...) {
    release_slot();
    throw;
  }
  release_slot();

  std::string content;
  try {
    const auto parsed = json::parse(result.body);
    content = parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed chat completion body: ") + e.what());
  }
  if (cache_) {
    cache_->put(key, {{"key", key}, {"endpoint", req.endpoint}, {"request", body}, {"content", content}});
  }
  return {std::move(content), false, elapsed()};
}

json LlmGateway::post_cached(const std::string& url, const json& body, const std::string& key) {
  if (cache_) {
    if (auto hit = cache_->get(key); hit && hit->contains("response")) {
      ++cache_hits_;
      if (log_) log_->emit("cache_hit", {{"url", url}, {"key", key}});
      return hit->at("response");
    }
  }
  if (options_.offline) throw TransportError("offline mode: no cached response for " + url);
  std::string api_key;
  for (const auto& [endpoint, k] : options_.api_keys) {
    if (url.starts_with(endpoint)) api_key = k;
  }
  std::int64_t backoff_ms = 0;
  HttpResult result;
  acquire_slot(parse_url(url).origin);
  try {
    result = send_with_retries(url, api_key, canonical_dump(body), key, backoff_ms);
  } catch (...) {
    release_slot();
    throw;
  }
  release_slot();
  json parsed;
  try {
    parsed = json::parse(result.body);
  } catch (const std::exception& e) {
    throw ProtocolError(std::string("malformed JSON body from ") + url + ": " + e.what());
  }
  if (cache_) cache_->put(key, {{"key", key}, {"url", url}, {"response", parsed}});
  return parsed;
}

}  // namespace ssbc
