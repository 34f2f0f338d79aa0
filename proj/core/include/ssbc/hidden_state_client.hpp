#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ssbc/json_io.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

class LlmGateway;

/// Body of POST /v1/hidden_states. An empty `layers` list with all_layers
/// set serializes as "all".
struct ExtractionRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  std::vector<std::uint16_t> layers;
  bool all_layers = false;
};

struct LayerVector {
  std::uint16_t index = 0;
  std::vector<float> vector;
};

struct ExtractionResponse {
  std::size_t hidden_dim = 0;
  std::vector<LayerVector> layers;

  /// Vector for `layer`, or nullptr when absent.
  const std::vector<float>* find(std::uint16_t layer) const;
};

json to_json(const ExtractionRequest& req);
ExtractionRequest extraction_request_from_json(const json& body);

json to_json(const ExtractionResponse& resp);

/// Throws ProtocolError (from the gateway error family) when hidden_dim is
/// not positive, a vector length differs from hidden_dim, or a value is
/// non-finite.
ExtractionResponse extraction_response_from_json(const json& body);

/// Cache key over the canonical request body and the service URL.
std::string extraction_key(const std::string& url, const ExtractionRequest& req);

/// Client for the hidden-state extraction service. Requests go through the
/// gateway so they share its cache, retries and rate limits.
class HiddenStateClient {
 public:
  HiddenStateClient(LlmGateway& gateway, std::string base_url);

  /// Also checks that every requested layer is present in the response.
  ExtractionResponse extract(const ExtractionRequest& req) const;
  const std::string& url() const { return url_; }

 private:
  LlmGateway& gateway_;
  std::string url_;
};

}  // namespace ssbc
