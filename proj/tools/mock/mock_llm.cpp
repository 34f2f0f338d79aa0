#include "mock_llm.hpp"

#include <algorithm>
#include <cctype>

#include <httplib.h>

#include "ssbc/hashing.hpp"
#include "ssbc/shard_engine.hpp"

namespace ssbc::mock {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

bool contains_any(const std::string& haystack, const std::vector<std::string_view>& needles) {
  return std::ranges::any_of(needles, [&](std::string_view n) { return haystack.find(n) != std::string::npos; });
}

std::string after(std::string_view text, std::string_view marker) {
  const auto pos = text.rfind(marker);
  if (pos == std::string_view::npos) return std::string(text);
  return std::string(text.substr(pos + marker.size()));
}

std::string before(std::string_view text, std::string_view marker) {
  const auto pos = text.find(marker);
  return std::string(pos == std::string_view::npos ? text : text.substr(0, pos));
}

json completion(const std::string& content) {
  return {{"id", "mock-" + sha256_hex(content).substr(0, 12)},
          {"object", "chat.completion"},
          {"choices", json::array({{{"index", 0},
                                    {"message", {{"role", "assistant"}, {"content", content}}},
                                    {"finish_reason", "stop"}}})}};
}

std::string agent_reply(const json& messages) {
  std::string last_user;
  std::size_t user_turns = 0;
  for (const auto& m : messages) {
    if (m.at("role") == "user") {
      last_user = m.at("content").get<std::string>();
      ++user_turns;
    }
  }
  std::string reply;
  switch (distress_cue(last_user)) {
    case 2:
      reply = "I'm so sorry you're going through this. It must feel overwhelming right now. It is not your fault.";
      break;
    case 1:
      reply = "That sounds stressful, and your feelings are valid. Try writing down what worries you most.";
      break;
    default:
      reply = "One way to approach this is to break it into smaller steps. Research suggests planning ahead helps.";
      break;
  }
  if (last_user.find('?') != std::string::npos) reply += " If it keeps weighing on you, a therapist could help.";
  if (user_turns >= 3) reply += " You have shown real strength by sharing all of this.";
  return reply;
}

std::string annotation_reply(const std::string& prompt, double temperature) {
  const auto message = after(prompt, "## Message to annotate\n\n");
  auto labels = mock_labels(message);
  // higher temperatures occasionally drop the last label
  const auto h = sha256_hex(message);
  if (temperature > 0.5 && labels.size() > 1 && (std::stoi(h.substr(0, 2), nullptr, 16) % 3 == 0)) labels.pop_back();
  json arr = labels;
  return "Going through every category, the message mainly offers the following support.\n\nFinal answer: " +
         arr.dump();
}

std::string distress_reply(const std::string& prompt) {
  auto text = before(after(prompt, "Post: "), "\n\n---");
  // last user block of a rendered prefix
  if (auto pos = text.rfind("User: "); pos != std::string::npos) text = before(text.substr(pos + 6), "\n\nAssistant: ");
  static constexpr std::array<std::string_view, 3> kNames{"None", "Mild", "Moderate+"};
  const int level = distress_cue(text);
  return "Severity reasoning: keyword review of the disclosure.\nConfidence reasoning: cues are explicit.\n\n"
         "Final answer: {\"severity\": \"" +
         std::string(kNames[static_cast<std::size_t>(level)]) + "\", \"confidence\": \"High\"}";
}

}  // namespace

int distress_cue(std::string_view text) {
  const auto t = lower(text);
  if (contains_any(t, {"hopeless", "can't cope", "cannot cope", "panic", "unsafe", "worthless", "falling apart"})) {
    return 2;
  }
  if (contains_any(t, {"worried", "stressed", "anxious", "frustrated", "nervous", "upset"})) return 1;
  return 0;
}

std::vector<std::string> mock_shards(std::string_view body) {
  struct Span {
    std::size_t begin, end;
  };
  std::vector<Span> sentences;
  std::size_t start = 0;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    const bool boundary = (c == '.' || c == '!' || c == '?') &&
                          (i + 1 == body.size() || std::isspace(static_cast<unsigned char>(body[i + 1])));
    if (boundary || c == '\n') {
      if (i + 1 > start) sentences.push_back({start, c == '\n' ? i : i + 1});
      start = i + 1;
    }
  }
  if (start < body.size()) sentences.push_back({start, body.size()});

  std::vector<std::string> out;
  std::optional<Span> pending;
  for (auto s : sentences) {
    while (s.begin < s.end && std::isspace(static_cast<unsigned char>(body[s.begin]))) ++s.begin;
    if (s.begin >= s.end) continue;
    const auto text = lower(body.substr(s.begin, s.end - s.begin));
    if (text.starts_with("edit:") || text.starts_with("update:")) break;
    if (contains_any(text, {"has anyone", "do any of you", "anyone else"})) {
      pending.reset();
      continue;
    }
    if (!pending) pending = s;
    pending->end = s.end;
    const auto merged = body.substr(pending->begin, pending->end - pending->begin);
    if (word_count(merged) >= 3) {
      out.emplace_back(merged);
      pending.reset();
    }
  }
  return out;
}

std::vector<std::string> mock_labels(std::string_view assistant_text) {
  const auto t = lower(assistant_text);
  struct Cue {
    std::string_view label;
    std::vector<std::string_view> words;
  };
  static const std::vector<Cue> cues{
      {"Sympathy", {"sorry"}},
      {"Empathy", {"must feel"}},
      {"Advice", {"try "}},
      {"Referral", {"therapist", "helpline"}},
      {"Teaching", {"research", "one way"}},
      {"Compliment", {"strength", "courage"}},
      {"Validation", {"valid"}},
      {"Relief of blame", {"not your fault"}},
      {"Presence", {"i'm here"}},
  };
  std::vector<std::string> out;
  for (const auto& c : cues) {
    if (contains_any(t, c.words)) out.emplace_back(c.label);
  }
  if (out.size() > 3) out.resize(3);
  return out;
}

json handle_chat(const json& body, const MockOptions&) {
  if (!body.is_object() || !body.contains("messages") || !body.at("messages").is_array() ||
      body.at("messages").empty()) {
    throw PreconditionError("request has no messages");
  }
  const auto& messages = body.at("messages");
  const double temperature = body.value("temperature", 0.0);
  if (messages.front().at("role") == "system") return completion(agent_reply(messages));
  const auto prompt = messages.back().at("content").get<std::string>();
  if (prompt.starts_with("You are an AI assistant whose task is to segment")) {
    return completion(json(mock_shards(after(prompt, "\n\nPost:\n"))).dump());
  }
  if (prompt.find("emotional distress severity level") != std::string::npos) return completion(distress_reply(prompt));
  if (prompt.find("annotating a response to a user who is seeking support") != std::string::npos) {
    return completion(annotation_reply(prompt, temperature));
  }
  return completion("OK");
}

json handle_hidden_states(const json& body, const MockOptions& options) {
  if (!body.contains("messages") || !body.at("messages").is_array()) throw PreconditionError("request has no messages");
  std::vector<std::uint16_t> layers;
  const auto& requested = body.at("layers");
  if (requested.is_string() && requested == "all") {
    for (std::uint16_t l = 0; l < options.layers; ++l) layers.push_back(l);
  } else {
    for (const auto& l : requested) {
      const auto v = l.get<int>();
      if (v < 0 || v >= options.layers) throw PreconditionError("layer out of range: " + std::to_string(v));
      layers.push_back(static_cast<std::uint16_t>(v));
    }
  }
  std::string last_user;
  for (const auto& m : body.at("messages")) {
    if (m.at("role") == "user") last_user = m.at("content").get<std::string>();
  }
  const int level = distress_cue(last_user);
  const auto base = canonical_dump(body.at("messages"));
  json out_layers = json::array();
  for (auto l : layers) {
    std::vector<float> v;
    std::string digest;
    for (std::size_t k = 0; v.size() < options.hidden_dim; ++k) {
      digest = sha256_hex(base + ":" + std::to_string(l) + ":" + std::to_string(k));
      for (std::size_t i = 0; i + 2 <= digest.size() && v.size() < options.hidden_dim; i += 2) {
        v.push_back(static_cast<float>(std::stoi(digest.substr(i, 2), nullptr, 16) / 255.0 - 0.5));
      }
    }
    v[static_cast<std::size_t>(level)] +=
        static_cast<float>(options.separation * (l + 1) / static_cast<double>(options.layers));
    out_layers.push_back({{"index", l}, {"vector", v}});
  }
  return {{"hidden_dim", options.hidden_dim}, {"layers", out_layers}};
}

HttpResult dispatch(const std::string& path, const std::string& body, const MockOptions& options) {
  try {
    const auto parsed = json::parse(body);
    if (path.ends_with("/chat/completions")) return {200, handle_chat(parsed, options).dump(), {}};
    if (path.ends_with("/v1/hidden_states")) return {200, handle_hidden_states(parsed, options).dump(), {}};
    return {404, R"({"error":"not found"})", {}};
  } catch (const std::exception& e) {
    return {400, json{{"error", e.what()}}.dump(), {}};
  }
}

HttpResult MockTransport::post_json(const std::string& url, const std::map<std::string, std::string>&,
                                    const std::string& body, std::chrono::milliseconds) {
  ++calls_;
  return dispatch(parse_url(url).path, body, options_);
}

struct MockServer::Impl {
  httplib::Server server;
};

MockServer::MockServer(MockOptions options) : impl_(std::make_unique<Impl>()), options_(options) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const auto result = dispatch(req.path, req.body, options_);
    res.status = result.status;
    res.set_content(result.body, "application/json");
  };
  impl_->server.Post(R"(.*)", handler);
}

MockServer::~MockServer() { stop(); }

int MockServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("mock server cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void MockServer::serve(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("mock server cannot listen on " + host + ":" + std::to_string(port));
}

void MockServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace ssbc::mock
