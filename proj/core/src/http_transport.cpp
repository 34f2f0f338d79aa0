#include <httplib.h>

#include "ssbc/llm_gateway.hpp"

namespace ssbc {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  HttpResult post_json(const std::string& url, const std::map<std::string, std::string>& headers,
                       const std::string& body, std::chrono::milliseconds timeout) override {
    const auto parsed = parse_url(url);
    httplib::Client client(parsed.origin);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(parsed.path.empty() ? "/" : parsed.path, h, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }
};

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport() { return std::make_unique<HttplibTransport>(); }

}  // namespace ssbc
