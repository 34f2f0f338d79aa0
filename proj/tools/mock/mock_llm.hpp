#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

#include "ssbc/json_io.hpp"
#include "ssbc/llm_gateway.hpp"

namespace ssbc::mock {

/// Deterministic stand-in for the chat-completions and hidden-state
/// services. Replies depend only on the request body.
struct MockOptions {
  std::size_t hidden_dim = 16;
  std::uint16_t layers = 4;
  double separation = 4.0;  // class offset on the top layer
};

/// 0 none, 1 mild, 2 moderate+ from keyword cues.
int distress_cue(std::string_view text);

/// Sentence split of a post body with short sentences merged forward and
/// audience-addressed or post-edit text dropped.
std::vector<std::string> mock_shards(std::string_view body);

/// Labels the mock annotator assigns to an assistant message, table order.
std::vector<std::string> mock_labels(std::string_view assistant_text);

/// Body of a chat-completions response. Throws PreconditionError on a
/// malformed request.
json handle_chat(const json& body, const MockOptions& options = {});
/// Body of a hidden-state response.
json handle_hidden_states(const json& body, const MockOptions& options = {});

/// In-process transport; avoids sockets in unit tests.
class MockTransport : public HttpTransport {
 public:
  explicit MockTransport(MockOptions options = {}) : options_(options) {}
  HttpResult post_json(const std::string& url, const std::map<std::string, std::string>& headers,
                       const std::string& body, std::chrono::milliseconds timeout) override;
  std::uint64_t calls() const { return calls_; }

 private:
  MockOptions options_;
  std::atomic<std::uint64_t> calls_{0};
};

/// Routes a POST to the matching handler: {status, body}.
HttpResult dispatch(const std::string& path, const std::string& body, const MockOptions& options);

/// HTTP server on 127.0.0.1 serving <any>/chat/completions and
/// /v1/hidden_states.
class MockServer {
 public:
  explicit MockServer(MockOptions options = {});
  ~MockServer();

  /// Binds (port 0 = ephemeral) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Blocks serving on the calling thread.
  void serve(const std::string& host, int port);
  void stop();
  std::uint64_t requests() const { return requests_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  MockOptions options_;
  std::atomic<std::uint64_t> requests_{0};
  std::thread thread_;
};

}  // namespace ssbc::mock
