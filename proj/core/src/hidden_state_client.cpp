#include "ssbc/hidden_state_client.hpp"

#include <algorithm>
#include <cmath>

#include "ssbc/hashing.hpp"
#include "ssbc/llm_gateway.hpp"

namespace ssbc {

const std::vector<float>* ExtractionResponse::find(std::uint16_t layer) const {
  auto it = std::ranges::find(layers, layer, &LayerVector::index);
  return it == layers.end() ? nullptr : &it->vector;
}

json to_json(const ExtractionRequest& req) {
  json messages = json::array();
  for (const auto& m : req.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  json j{{"model_id", req.model_id}, {"messages", messages}};
  if (req.all_layers) {
    j["layers"] = "all";
  } else {
    j["layers"] = req.layers;
  }
  return j;
}

ExtractionRequest extraction_request_from_json(const json& body) {
  ExtractionRequest req;
  req.model_id = body.at("model_id").get<std::string>();
  for (const auto& m : body.at("messages")) {
    const auto role = parse_role(m.at("role").get<std::string>());
    if (!role) throw ParseError("unknown message role");
    req.messages.push_back({*role, m.at("content").get<std::string>()});
  }
  const auto& layers = body.at("layers");
  if (layers.is_string()) {
    if (layers.get<std::string>() != "all") throw ParseError("layers must be a list or \"all\"");
    req.all_layers = true;
  } else {
    for (const auto& l : layers) {
      const auto v = l.get<std::int64_t>();
      if (v < 0 || v > 0xFFFF) throw ParseError("layer index out of range");
      req.layers.push_back(static_cast<std::uint16_t>(v));
    }
  }
  return req;
}

json to_json(const ExtractionResponse& resp) {
  json layers = json::array();
  for (const auto& l : resp.layers) layers.push_back({{"index", l.index}, {"vector", l.vector}});
  return {{"hidden_dim", resp.hidden_dim}, {"layers", layers}};
}

ExtractionResponse extraction_response_from_json(const json& body) {
  ExtractionResponse resp;
  try {
    const auto dim = body.at("hidden_dim").get<std::int64_t>();
    if (dim <= 0) throw ProtocolError("hidden_dim must be positive");
    resp.hidden_dim = static_cast<std::size_t>(dim);
    for (const auto& l : body.at("layers")) {
      LayerVector lv;
      lv.index = l.at("index").get<std::uint16_t>();
      lv.vector.reserve(resp.hidden_dim);
      for (const auto& v : l.at("vector")) {
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw ProtocolError("non-finite hidden-state value");
        lv.vector.push_back(static_cast<float>(d));
      }
      if (lv.vector.size() != resp.hidden_dim) {
        throw ProtocolError("layer " + std::to_string(lv.index) + " vector length differs from hidden_dim");
      }
      resp.layers.push_back(std::move(lv));
    }
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed extraction response: ") + e.what());
  }
  return resp;
}

std::string extraction_key(const std::string& url, const ExtractionRequest& req) {
  return sha256_hex(canonical_dump({{"url", url}, {"request", to_json(req)}}));
}

HiddenStateClient::HiddenStateClient(LlmGateway& gateway, std::string base_url)
    : gateway_(gateway), url_(std::move(base_url)) {
  while (!url_.empty() && url_.back() == '/') url_.pop_back();
  if (!url_.ends_with("/v1/hidden_states")) {
    url_ += url_.ends_with("/v1") ? "/hidden_states" : "/v1/hidden_states";
  }
}

ExtractionResponse HiddenStateClient::extract(const ExtractionRequest& req) const {
  if (req.messages.empty()) throw PreconditionError("extraction request has no messages");
  if (!req.all_layers && req.layers.empty()) throw PreconditionError("extraction request names no layers");
  auto resp = extraction_response_from_json(gateway_.post_cached(url_, to_json(req), extraction_key(url_, req)));
  for (auto layer : req.layers) {
    if (!resp.find(layer)) throw ProtocolError("extraction response lacks layer " + std::to_string(layer));
  }
  return resp;
}

}  // namespace ssbc
