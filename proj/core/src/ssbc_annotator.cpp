#include "ssbc/ssbc_annotator.hpp"

#include <algorithm>
#include <cctype>
#include <mutex>
#include <sstream>

#include "ssbc/hashing.hpp"
#include "ssbc/llm_gateway.hpp"
#include "ssbc/parallel.hpp"
#include "ssbc/prompts.hpp"
#include "ssbc/shard_engine.hpp"

namespace ssbc {

std::string build_annotation_prompt(std::string_view user_msg, std::string_view assistant_msg) {
  if (normalize_whitespace(assistant_msg).empty()) {
    throw PreconditionError("assistant message to annotate is empty");
  }
  return prompts::render(prompts::ssbc_annotation(), {{"codebook", std::string(prompts::ssbc_codebook())},
                                                      {"user_message", std::string(user_msg)},
                                                      {"message_to_annotate", std::string(assistant_msg)}});
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view strip(std::string_view s, std::string_view chars) {
  const auto b = s.find_first_not_of(chars);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(chars) - b + 1);
}

// Offset just past "final answer:" on the last line that starts with it
// (ignoring leading whitespace and markdown emphasis).
std::optional<std::size_t> last_final_answer(std::string_view text) {
  std::optional<std::size_t> found;
  std::size_t line_start = 0;
  while (line_start <= text.size()) {
    auto line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const auto line = text.substr(line_start, line_end - line_start);
    const auto lead = line.find_first_not_of(" \t*#>_");
    if (lead != std::string_view::npos) {
      const auto rest = lower(line.substr(lead, 13));
      if (rest == "final answer:") {
        found = line_start + lead + 13;
      } else if (rest.starts_with("final answer")) {
        const auto colon = line.find(':', lead);
        if (colon != std::string_view::npos) found = line_start + colon + 1;
      }
    }
    if (line_end == text.size()) break;
    line_start = line_end + 1;
  }
  return found;
}

// First bracketed list after `from`. Strict JSON first, then a lenient
// comma split for single-quoted or unquoted entries.
std::optional<std::vector<std::string>> first_list_after(std::string_view text, std::size_t from) {
  const auto open = text.find('[', from);
  if (open == std::string_view::npos) return std::nullopt;
  auto close = text.find(']', open);
  if (close == std::string_view::npos) close = text.size();
  if (auto strict = find_last_string_array(text.substr(open, close + 1 - open))) return strict;
  std::vector<std::string> out;
  std::stringstream ss(std::string(text.substr(open + 1, close - open - 1)));
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto cleaned = strip(item, " \t\r\n\"'`*");
    if (!cleaned.empty()) out.emplace_back(cleaned);
  }
  return out;
}

}  // namespace

ParsedAnnotation parse_annotation_response(std::string_view text) {
  std::optional<std::vector<std::string>> raw;
  if (auto pos = last_final_answer(text)) raw = first_list_after(text, *pos);
  if (!raw) raw = find_last_string_array(text);
  if (!raw) throw ParseError("no final-answer label list in annotator response");

  ParsedAnnotation parsed;
  std::vector<SsbcLabel> valid;
  for (const auto& item : *raw) {
    auto label = parse_label(item);
    if (!label) {
      parsed.dropped.push_back(item);
      continue;
    }
    if (std::ranges::find(valid, *label) == valid.end()) valid.push_back(*label);
  }
  if (!raw->empty() && valid.empty()) throw ParseError("annotator listed no recognizable SSBC label");
  if (valid.size() > static_cast<std::size_t>(LabelSet::kMaxSize)) {
    parsed.truncated = true;
    valid.resize(LabelSet::kMaxSize);
  }
  for (auto l : valid) parsed.labels.insert(l);
  return parsed;
}

std::string_view to_string(AnnotationStatus status) {
  switch (status) {
    case AnnotationStatus::ok:
      return "ok";
    case AnnotationStatus::parse_failed:
      return "parse_failed";
    case AnnotationStatus::missing:
      return "missing";
  }
  return "ok";
}

namespace {
AnnotationStatus parse_status(std::string_view s) {
  if (s == "parse_failed") return AnnotationStatus::parse_failed;
  if (s == "missing") return AnnotationStatus::missing;
  return AnnotationStatus::ok;
}
}  // namespace

std::vector<json> annotation_records(const AnnotationRun& run) {
  std::vector<json> out;
  for (const auto& [key, ann] : run.turns) {
    out.push_back({{"conv_id", key.conv_id},
                   {"turn", key.turn},
                   {"temperature", run.temperature},
                   {"labels", to_json(ann.labels)},
                   {"status", to_string(ann.status)},
                   {"raw_response_ref", sha256_hex(ann.raw_response)}});
  }
  return out;
}

std::vector<json> raw_response_records(const AnnotationRun& run) {
  std::map<std::string, std::string> unique;
  for (const auto& [key, ann] : run.turns) unique.emplace(sha256_hex(ann.raw_response), ann.raw_response);
  std::vector<json> out;
  for (const auto& [ref, raw] : unique) out.push_back({{"ref", ref}, {"raw", raw}});
  return out;
}

AnnotationRun annotation_run_from_records(const std::vector<json>& records, const std::vector<json>& raw_records) {
  std::map<std::string, std::string> raw;
  for (const auto& r : raw_records) raw.emplace(r.at("ref").get<std::string>(), r.at("raw").get<std::string>());
  AnnotationRun run;
  for (const auto& r : records) {
    run.temperature = r.at("temperature").get<double>();
    TurnAnnotation ann;
    ann.labels = label_set_from_json(r.at("labels"));
    ann.status = parse_status(r.value("status", std::string("ok")));
    if (auto it = raw.find(r.value("raw_response_ref", std::string{})); it != raw.end()) ann.raw_response = it->second;
    run.turns[{r.at("conv_id").get<std::string>(), r.at("turn").get<std::size_t>()}] = std::move(ann);
  }
  return run;
}

std::string annotator_hash(const AnnotatorConfig& config, const std::vector<double>& temperatures) {
  json j{{"endpoint", config.endpoint},
         {"model", config.model},
         {"max_tokens", config.max_tokens},
         {"seed", config.seed},
         {"temperatures", temperatures},
         {"template", sha256_hex(prompts::ssbc_annotation())},
         {"codebook", sha256_hex(prompts::ssbc_codebook())}};
  return sha256_hex(canonical_dump(j));
}

TurnAnnotation annotate_exchange(std::string_view user_msg, std::string_view assistant_msg, double temperature,
                                 LlmGateway& gateway, const AnnotatorConfig& config) {
  const auto prompt = build_annotation_prompt(user_msg, assistant_msg);
  TurnAnnotation ann;
  for (int attempt = 0; attempt < 2; ++attempt) {
    ChatRequest req{config.endpoint, config.model, {{Role::user, prompt}}, temperature, config.max_tokens,
                    config.seed + attempt};
    try {
      ann.raw_response = gateway.chat_complete(req).content;
    } catch (const GatewayError& e) {
      ann.status = AnnotationStatus::missing;
      ann.raw_response = std::string("gateway error: ") + e.what();
      ann.labels = {};
      return ann;
    }
    try {
      ann.labels = parse_annotation_response(ann.raw_response).labels;
      ann.status = AnnotationStatus::ok;
      return ann;
    } catch (const ParseError&) {
      ann.status = AnnotationStatus::parse_failed;
    }
  }
  ann.labels = {};
  return ann;
}

AnnotationRun annotate_run(const std::vector<Conversation>& conversations, double temperature, LlmGateway& gateway,
                           const AnnotatorConfig& config) {
  struct Job {
    TurnKey key;
    const Turn* turn;
  };
  std::vector<Job> jobs;
  for (const auto& conv : conversations) {
    if (!conv.complete) throw PreconditionError("conversation " + conv.conv_id + " is partial");
    for (const auto& t : conv.turns) jobs.push_back({{conv.conv_id, t.index}, &t});
  }
  std::vector<TurnAnnotation> results(jobs.size());
  parallel_for(jobs.size(), config.concurrency, [&](std::size_t i) {
    results[i] = annotate_exchange(jobs[i].turn->user_text, jobs[i].turn->assistant_text, temperature, gateway, config);
  });
  AnnotationRun run;
  run.temperature = temperature;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!run.turns.emplace(jobs[i].key, std::move(results[i])).second) {
      throw PreconditionError("duplicate turn key " + jobs[i].key.conv_id + "#" + std::to_string(jobs[i].key.turn));
    }
  }
  return run;
}

ConsensusRecord consensus_of(const std::array<LabelMask, 3>& runs) {
  ConsensusRecord record;
  std::vector<SsbcLabel> quorum;
  for (auto label : kAllLabels) {
    int votes = 0;
    for (auto mask : runs) votes += (mask & bit(label)) ? 1 : 0;
    record.votes[static_cast<std::size_t>(label)] = votes;
    if (votes >= 2) quorum.push_back(label);
  }
  // stable: equal vote counts keep table order
  std::ranges::stable_sort(quorum, [&](SsbcLabel a, SsbcLabel b) {
    return record.votes[static_cast<std::size_t>(a)] > record.votes[static_cast<std::size_t>(b)];
  });
  if (quorum.size() > static_cast<std::size_t>(LabelSet::kMaxSize)) quorum.resize(LabelSet::kMaxSize);
  for (auto l : quorum) record.labels.insert(l);
  return record;
}

std::map<TurnKey, ConsensusRecord> consensus(const std::array<const AnnotationRun*, 3>& runs) {
  for (const auto* r : runs) {
    if (!r) throw PreconditionError("consensus needs three annotation runs");
  }
  const auto& base = runs[0]->turns;
  for (std::size_t i = 1; i < 3; ++i) {
    const auto& other = runs[i]->turns;
    const bool same = base.size() == other.size() &&
                      std::equal(base.begin(), base.end(), other.begin(),
                                 [](const auto& a, const auto& b) { return a.first == b.first; });
    if (!same) throw ConsistencyError("annotation runs cover different turn keys");
  }
  std::map<TurnKey, ConsensusRecord> out;
  auto it1 = runs[1]->turns.begin();
  auto it2 = runs[2]->turns.begin();
  for (const auto& [key, ann0] : base) {
    out.emplace(key, consensus_of({ann0.labels.mask(), it1->second.labels.mask(), it2->second.labels.mask()}));
    ++it1;
    ++it2;
  }
  return out;
}

json to_json(const TurnKey& key, const ConsensusRecord& record) {
  json votes = json::object();
  for (auto l : kAllLabels) {
    if (int v = record.votes[static_cast<std::size_t>(l)]; v > 0) votes[std::string(to_string(l))] = v;
  }
  return {{"conv_id", key.conv_id}, {"turn", key.turn}, {"labels", to_json(record.labels)}, {"votes", votes}};
}

std::pair<TurnKey, ConsensusRecord> consensus_from_json(const json& record) {
  TurnKey key{record.at("conv_id").get<std::string>(), record.at("turn").get<std::size_t>()};
  ConsensusRecord rec;
  rec.labels = label_set_from_json(record.at("labels"));
  const auto votes = record.value("votes", json::object());
  for (const auto& [name, count] : votes.items()) {
    if (auto l = parse_label(name)) rec.votes[static_cast<std::size_t>(*l)] = count.get<int>();
  }
  return {std::move(key), rec};
}

}  // namespace ssbc
