#include "ssbc/pipeline_config.hpp"

#include <cstdlib>
#include <set>

namespace ssbc {

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

namespace {

std::string interpolate_string(const std::string& s, const EnvLookup& env) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto open = s.find("${", pos);
    if (open == std::string::npos) break;
    const auto close = s.find('}', open + 2);
    if (close == std::string::npos) throw ConfigError("unterminated ${ in \"" + s + "\"");
    out.append(s, pos, open - pos);
    auto expr = s.substr(open + 2, close - open - 2);
    std::optional<std::string> fallback;
    if (auto sep = expr.find(":-"); sep != std::string::npos) {
      fallback = expr.substr(sep + 2);
      expr.resize(sep);
    }
    auto value = env(expr);
    if (!value || (value->empty() && fallback)) value = fallback;
    if (!value) throw ConfigError("environment variable " + expr + " is not set");
    out += *value;
    pos = close + 1;
  }
  out.append(s, pos);
  return out;
}

// Reads named fields out of one JSON object and rejects anything left over.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key " + where_ + "." + key);
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where_ + "." + key + " has the wrong type");
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  void get(const char* key, std::filesystem::path& out) {
    std::string s;
    get(key, s);
    if (!s.empty()) out = s;
  }

  const json* section(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return nullptr;
    return &j_.at(key);
  }

  std::string path(const char* key) const { return where_ + "." + key; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::string optional_path(const std::filesystem::path& p) { return p.empty() ? std::string() : p.string(); }

}  // namespace

json interpolate_env(const json& value, const EnvLookup& env) {
  if (value.is_string()) return interpolate_string(value.get<std::string>(), env);
  if (value.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : value.items()) out[k] = interpolate_env(v, env);
    return out;
  }
  if (value.is_array()) {
    json out = json::array();
    for (const auto& v : value) out.push_back(interpolate_env(v, env));
    return out;
  }
  return value;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  Reader top(j, "config");
  top.get("run_id", c.run_id);
  top.get("runs_root", c.runs_root);
  top.get("corpus", c.corpus);
  top.get("seed", c.seed);
  if (const auto* eps = top.section("endpoints")) {
    if (!eps->is_object()) throw ConfigError("config.endpoints must be an object");
    for (const auto& [alias, spec] : eps->items()) {
      EndpointSpec e;
      if (spec.is_string()) {
        e.url = spec.get<std::string>();
      } else {
        Reader r(spec, "config.endpoints." + alias);
        r.get("url", e.url);
        r.get("api_key_env", e.api_key_env);
        r.finish();
      }
      c.endpoints[alias] = e;
    }
  }
  if (const auto* s = top.section("shard_teacher")) {
    Reader r(*s, top.path("shard_teacher"));
    r.get("endpoint", c.shard_teacher.endpoint);
    r.get("model", c.shard_teacher.model);
    r.get("temperature", c.shard_teacher.temperature);
    r.get("max_tokens", c.shard_teacher.max_tokens);
    r.get("max_attempts", c.shard_teacher.max_attempts);
    r.finish();
  }
  if (const auto* s = top.section("agent")) {
    Reader r(*s, top.path("agent"));
    r.get("endpoint", c.agent.endpoint);
    r.get("model", c.agent.model);
    r.get("temperature", c.agent.temperature);
    r.get("max_tokens", c.agent.max_tokens);
    r.get("seed", c.agent.seed);
    r.get("system_prompt", c.agent.system_prompt);
    r.get("single_turn", c.agent.single_turn);
    r.finish();
  }
  if (const auto* s = top.section("annotator")) {
    Reader r(*s, top.path("annotator"));
    r.get("endpoint", c.annotator.endpoint);
    r.get("model", c.annotator.model);
    r.get("temperatures", c.annotator.temperatures);
    r.get("max_tokens", c.annotator.max_tokens);
    r.finish();
  }
  if (const auto* s = top.section("distress_teacher")) {
    Reader r(*s, top.path("distress_teacher"));
    r.get("endpoint", c.distress_teacher.endpoint);
    r.get("model", c.distress_teacher.model);
    r.get("temperature", c.distress_teacher.temperature);
    r.get("max_tokens", c.distress_teacher.max_tokens);
    r.finish();
  }
  if (const auto* s = top.section("hidden_states")) {
    Reader r(*s, top.path("hidden_states"));
    r.get("endpoint", c.hidden_states.endpoint);
    r.get("model_id", c.hidden_states.model_id);
    r.get("include_reply", c.hidden_states.include_reply);
    r.finish();
  }
  if (const auto* s = top.section("probe")) {
    Reader r(*s, top.path("probe"));
    r.get("hsd", c.probe.hsd);
    r.get("dialogues", c.probe.dialogues);
    r.get("l2", c.probe.l2);
    r.get("max_iterations", c.probe.max_iterations);
    r.get("folds", c.probe.folds);
    r.get("k", c.probe.k);
    r.get("min_layer", c.probe.min_layer);
    r.get("max_layer", c.probe.max_layer);
    r.finish();
  }
  if (const auto* s = top.section("analysis")) {
    Reader r(*s, top.path("analysis"));
    r.get("reference_community", c.analysis.reference_community);
    r.get("turn_coding", c.analysis.turn_coding);
    r.get("q", c.analysis.q);
    r.get("regression_method", c.analysis.regression_method);
    r.get("include_partial", c.analysis.include_partial);
    r.finish();
  }
  if (const auto* s = top.section("gateway")) {
    Reader r(*s, top.path("gateway"));
    r.get("max_retries", c.gateway.max_retries);
    r.get("concurrency", c.gateway.concurrency);
    r.get("rate_limit_rps", c.gateway.rate_limit_rps);
    r.get("timeout_ms", c.gateway.timeout_ms);
    r.get("base_delay_ms", c.gateway.base_delay_ms);
    r.get("max_delay_ms", c.gateway.max_delay_ms);
    r.get("offline", c.gateway.offline);
    r.finish();
  }
  top.finish();
  return c;
}

json to_json(const PipelineConfig& c) {
  json endpoints = json::object();
  for (const auto& [alias, e] : c.endpoints) endpoints[alias] = {{"url", e.url}, {"api_key_env", e.api_key_env}};
  auto opt = [](const auto& o) { return o ? json(*o) : json(); };
  return {
      {"run_id", c.run_id},
      {"runs_root", c.runs_root.string()},
      {"corpus", optional_path(c.corpus)},
      {"seed", c.seed},
      {"endpoints", endpoints},
      {"shard_teacher",
       {{"endpoint", c.shard_teacher.endpoint},
        {"model", c.shard_teacher.model},
        {"temperature", c.shard_teacher.temperature},
        {"max_tokens", c.shard_teacher.max_tokens},
        {"max_attempts", c.shard_teacher.max_attempts}}},
      {"agent",
       {{"endpoint", c.agent.endpoint},
        {"model", c.agent.model},
        {"temperature", c.agent.temperature},
        {"max_tokens", c.agent.max_tokens},
        {"seed", opt(c.agent.seed)},
        {"system_prompt", c.agent.system_prompt},
        {"single_turn", c.agent.single_turn}}},
      {"annotator",
       {{"endpoint", c.annotator.endpoint},
        {"model", c.annotator.model},
        {"temperatures", c.annotator.temperatures},
        {"max_tokens", c.annotator.max_tokens}}},
      {"distress_teacher",
       {{"endpoint", c.distress_teacher.endpoint},
        {"model", c.distress_teacher.model},
        {"temperature", c.distress_teacher.temperature},
        {"max_tokens", c.distress_teacher.max_tokens}}},
      {"hidden_states",
       {{"endpoint", c.hidden_states.endpoint},
        {"model_id", c.hidden_states.model_id},
        {"include_reply", c.hidden_states.include_reply}}},
      {"probe",
       {{"hsd", optional_path(c.probe.hsd)},
        {"dialogues", optional_path(c.probe.dialogues)},
        {"l2", c.probe.l2},
        {"max_iterations", c.probe.max_iterations},
        {"folds", c.probe.folds},
        {"k", c.probe.k},
        {"min_layer", opt(c.probe.min_layer)},
        {"max_layer", opt(c.probe.max_layer)}}},
      {"analysis",
       {{"reference_community", c.analysis.reference_community},
        {"turn_coding", c.analysis.turn_coding},
        {"q", c.analysis.q},
        {"regression_method", c.analysis.regression_method},
        {"include_partial", c.analysis.include_partial}}},
      {"gateway",
       {{"max_retries", c.gateway.max_retries},
        {"concurrency", c.gateway.concurrency},
        {"rate_limit_rps", c.gateway.rate_limit_rps},
        {"timeout_ms", c.gateway.timeout_ms},
        {"base_delay_ms", c.gateway.base_delay_ms},
        {"max_delay_ms", c.gateway.max_delay_ms},
        {"offline", c.gateway.offline}}},
  };
}

PipelineConfig load_config(const std::filesystem::path& path, const EnvLookup& env) {
  json raw;
  try {
    raw = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  auto config = config_from_json(interpolate_env(raw, env));
  const auto base = path.parent_path();
  auto anchor = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  anchor(config.runs_root);
  anchor(config.corpus);
  anchor(config.probe.hsd);
  anchor(config.probe.dialogues);
  return config;
}

std::string resolve_endpoint(const PipelineConfig& config, const std::string& alias) {
  if (alias.starts_with("http://") || alias.starts_with("https://")) return alias;
  auto it = config.endpoints.find(alias);
  if (it == config.endpoints.end()) throw ConfigError("endpoint alias '" + alias + "' is not defined");
  return it->second.url;
}

void validate(const PipelineConfig& config) {
  if (config.run_id.empty()) throw ConfigError("run_id is required");
  for (const auto& [role, alias] : {std::pair{"shard_teacher", config.shard_teacher.endpoint},
                                    {"agent", config.agent.endpoint},
                                    {"annotator", config.annotator.endpoint},
                                    {"distress_teacher", config.distress_teacher.endpoint},
                                    {"hidden_states", config.hidden_states.endpoint}}) {
    if (alias.empty()) continue;
    try {
      resolve_endpoint(config, alias);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(role) + ": " + e.what());
    }
  }
  const auto& temps = config.annotator.temperatures;
  if (temps.size() != 3 || std::set<double>(temps.begin(), temps.end()).size() != 3) {
    throw ConfigError("annotator.temperatures must list three distinct temperatures");
  }
  for (double t : temps) {
    if (t < 0) throw ConfigError("annotation temperatures must be non-negative");
  }
  if (config.probe.k == 0) throw ConfigError("probe.k must be positive");
  if (config.probe.folds < 2) throw ConfigError("probe.folds must be at least 2");
  if (config.probe.l2 < 0) throw ConfigError("probe.l2 must be non-negative");
  if (!(config.analysis.q > 0 && config.analysis.q < 1)) throw ConfigError("analysis.q must lie in (0, 1)");
  if (config.analysis.turn_coding != "index" && config.analysis.turn_coding != "normalized") {
    throw ConfigError("analysis.turn_coding must be index or normalized");
  }
  const auto& m = config.analysis.regression_method;
  if (m != "plain" && m != "cluster_robust" && m != "random_intercept") {
    throw ConfigError("analysis.regression_method must be plain, cluster_robust or random_intercept");
  }
  if (config.gateway.concurrency == 0) throw ConfigError("gateway.concurrency must be positive");
  if (config.gateway.max_retries < 0) throw ConfigError("gateway.max_retries must be non-negative");
}

}  // namespace ssbc
