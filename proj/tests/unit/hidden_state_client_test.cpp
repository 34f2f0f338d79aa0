#include <gtest/gtest.h>

#include "mock_llm.hpp"
#include "scripted_transport.hpp"
#include "ssbc/hidden_state_client.hpp"
#include "ssbc/llm_gateway.hpp"
#include "temp_dir.hpp"

using namespace ssbc;
using ssbc::testing::ScriptedTransport;
using ssbc::testing::TempDir;

namespace {
ExtractionRequest req(std::vector<std::uint16_t> layers) {
  return {"agent", {{Role::user, "I feel anxious"}, {Role::assistant, "ok"}, {Role::user, "panic again"}}, layers, layers.empty()};
}
}  // namespace

TEST(ExtractionWire, RequestBodyShape) {
  const auto j = to_json(req({2, 5}));
  EXPECT_EQ(j, json::parse(R"({"model_id":"agent","layers":[2,5],"messages":[
      {"role":"user","content":"I feel anxious"},{"role":"assistant","content":"ok"},
      {"role":"user","content":"panic again"}]})"));
  EXPECT_EQ(to_json(req({}))["layers"], "all");
  const auto back = extraction_request_from_json(j);
  EXPECT_EQ(back.layers, (std::vector<std::uint16_t>{2, 5}));
  EXPECT_EQ(back.messages, req({}).messages);
  EXPECT_TRUE(extraction_request_from_json(to_json(req({}))).all_layers);
  EXPECT_THROW(extraction_request_from_json(json{{"model_id", "m"}, {"messages", json::array()}, {"layers", "some"}}),
               ParseError);
}

TEST(ExtractionWire, ResponseValidation) {
  const auto ok = json::parse(R"({"hidden_dim":2,"layers":[{"index":3,"vector":[0.5,-1]}]})");
  const auto r = extraction_response_from_json(ok);
  EXPECT_EQ(r.hidden_dim, 2u);
  ASSERT_NE(r.find(3), nullptr);
  EXPECT_EQ(*r.find(3), (std::vector<float>{0.5f, -1.0f}));
  EXPECT_EQ(r.find(4), nullptr);
  EXPECT_EQ(to_json(r), ok);
  EXPECT_THROW(extraction_response_from_json(json::parse(R"({"hidden_dim":0,"layers":[]})")), ProtocolError);
  EXPECT_THROW(extraction_response_from_json(json::parse(R"({"hidden_dim":3,"layers":[{"index":0,"vector":[1,2]}]})")),
               ProtocolError);
  EXPECT_THROW(extraction_response_from_json(json::parse(R"({"layers":[]})")), ProtocolError);
}

TEST(HiddenStateClient, PostsToServiceAndCaches) {
  TempDir dir;
  auto t = std::make_unique<mock::MockTransport>();
  auto* tp = t.get();
  LlmGateway gw(ssbc::testing::fast_options(), std::make_shared<ResponseCache>(dir / "cache"), std::move(t));
  HiddenStateClient client(gw, "http://127.0.0.1:1");
  EXPECT_EQ(client.url(), "http://127.0.0.1:1/v1/hidden_states");
  const auto a = client.extract(req({1, 3}));
  EXPECT_EQ(a.hidden_dim, 16u);
  ASSERT_EQ(a.layers.size(), 2u);
  const auto b = client.extract(req({1, 3}));
  EXPECT_EQ(a.find(3)->size(), 16u);
  EXPECT_EQ(*a.find(3), *b.find(3));
  EXPECT_EQ(tp->calls(), 1u);
  EXPECT_EQ(client.extract(req({})).layers.size(), 4u);
}

TEST(HiddenStateClient, MissingLayerAndServiceErrors) {
  TempDir dir;
  auto t = std::make_unique<ScriptedTransport>(std::vector<HttpResult>{
      {200, R"({"hidden_dim":1,"layers":[{"index":0,"vector":[1]}]})", ""}, {400, R"({"error":"layer out of range"})", ""}});
  LlmGateway gw(ssbc::testing::fast_options(), nullptr, std::move(t));
  HiddenStateClient client(gw, "http://h");
  EXPECT_THROW(client.extract(req({0, 1})), ProtocolError);
  EXPECT_THROW(client.extract(req({99})), RequestError);
  EXPECT_THROW(client.extract(ExtractionRequest{"m", {}, {1}, false}), PreconditionError);
  EXPECT_NE(extraction_key("http://h/v1/hidden_states", req({1})), extraction_key("http://h/v1/hidden_states", req({2})));
}
