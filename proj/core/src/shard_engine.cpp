#include "ssbc/shard_engine.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "ssbc/llm_gateway.hpp"
#include "ssbc/prompts.hpp"

namespace ssbc {

namespace {
bool is_space(unsigned char c) { return std::isspace(c) != 0; }
}  // namespace

json to_json(const Shard& shard) {
  return {{"post_id", shard.post_id},
          {"index", shard.index},
          {"text", shard.text},
          {"match_start", shard.match_start},
          {"match_end", shard.match_end}};
}

Shard shard_from_json(const json& record) {
  return {record.at("post_id").get<std::string>(), record.at("index").get<std::size_t>(),
          record.at("text").get<std::string>(), record.at("match_start").get<std::size_t>(),
          record.at("match_end").get<std::size_t>()};
}

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::not_substring:
      return "not_substring";
    case RejectReason::too_short:
      return "too_short";
    case RejectReason::out_of_order:
      return "out_of_order";
    case RejectReason::artifact_suspect:
      return "artifact_suspect";
  }
  return "not_substring";
}

bool ShardValidationReport::has_rejection(RejectReason reason) const {
  return std::ranges::any_of(rejected, [&](const auto& r) { return r.reason == reason; });
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c));
  }
  return out;
}

std::size_t word_count(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

ShardValidator::ShardValidator(ShardRules rules) : rules_(std::move(rules)) {
  for (const auto& p : rules_.artifact_patterns) {
    patterns_.emplace_back(p, std::regex::ECMAScript | std::regex::icase);
  }
}

ShardValidationReport ShardValidator::validate(const Post& post,
                                               const std::vector<std::string>& candidates) const {
  const auto body = normalize_whitespace(post.body);
  ShardValidationReport report;
  std::size_t search_from = 0;
  for (const auto& raw : candidates) {
    auto text = normalize_whitespace(raw);
    const auto reject = [&](RejectReason reason) { report.rejected.push_back({raw, reason}); };
    if (text.empty() || body.find(text) == std::string::npos) {
      reject(RejectReason::not_substring);
      continue;
    }
    if (word_count(text) < rules_.min_words) {
      reject(RejectReason::too_short);
      continue;
    }
    if (std::ranges::any_of(patterns_, [&](const std::regex& re) { return std::regex_search(text, re); })) {
      reject(RejectReason::artifact_suspect);
      continue;
    }
    const auto pos = body.find(text, search_from);
    if (pos == std::string::npos) {
      reject(RejectReason::out_of_order);
      continue;
    }
    Shard shard{post.post_id, report.accepted.size(), std::move(text), pos, 0};
    shard.match_end = pos + shard.text.size();
    search_from = shard.match_end;
    report.accepted.push_back(std::move(shard));
  }
  return report;
}

ShardValidationReport validate_shards(const Post& post, const std::vector<std::string>& candidates) {
  static const ShardValidator validator;
  return validator.validate(post, candidates);
}

std::string build_shard_prompt(const Post& post) {
  if (normalize_whitespace(post.body).empty()) throw PreconditionError("post body is empty");
  std::string prompt(prompts::shard_extraction());
  prompt += "\n\nPost:\n";
  prompt += post.body;
  return prompt;
}

namespace {

// End offset (exclusive) of the bracketed span starting at `open`, honouring
// JSON string escapes; npos if unbalanced.
std::size_t match_bracket(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[') {
      ++depth;
    } else if (c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

std::optional<std::vector<std::string>> as_string_array(std::string_view span) {
  const auto parsed = json::parse(span, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_array()) return std::nullopt;
  std::vector<std::string> out;
  for (const auto& e : parsed) {
    if (!e.is_string()) return std::nullopt;
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

std::optional<std::vector<std::string>> find_last_string_array(std::string_view text) {
  std::optional<std::vector<std::string>> last;
  std::size_t i = 0;
  while ((i = text.find('[', i)) != std::string_view::npos) {
    const auto end = match_bracket(text, i);
    if (end != std::string_view::npos) {
      if (auto arr = as_string_array(text.substr(i, end - i))) {
        last = std::move(arr);
        i = end;
        continue;
      }
    }
    ++i;
  }
  return last;
}

std::vector<std::string> parse_shard_response(std::string_view text) {
  auto arr = find_last_string_array(text);
  if (!arr) throw ParseError("no JSON array of strings in teacher response");
  return std::move(*arr);
}

json to_json(const ShardExtraction& extraction) {
  json shards = json::array();
  for (const auto& s : extraction.shards) shards.push_back(to_json(s));
  return {{"post_id", extraction.post_id},
          {"excluded", extraction.excluded},
          {"exclusion_reason", extraction.exclusion_reason},
          {"attempts", extraction.attempts},
          {"attempt_errors", extraction.attempt_errors},
          {"shards", shards}};
}

ShardExtraction extract_shards(const Post& post, LlmGateway& gateway, const ShardTeacherConfig& config,
                               const ShardValidator& validator) {
  ShardExtraction result;
  result.post_id = post.post_id;
  const auto prompt = build_shard_prompt(post);
  const int attempts = std::max(config.max_attempts, 1);
  for (int attempt = 0; attempt < attempts; ++attempt) {
    ++result.attempts;
    ChatRequest req{config.endpoint, config.model, {{Role::user, prompt}}, config.temperature,
                    config.max_tokens, config.seed + attempt};
    try {
      const auto response = gateway.chat_complete(req);
      const auto candidates = parse_shard_response(response.content);
      auto report = validator.validate(post, candidates);
      if (report.accepted.empty()) {
        result.attempt_errors.push_back("no accepted shards");
      } else if (report.has_rejection(RejectReason::not_substring)) {
        result.attempt_errors.push_back("candidate not a verbatim substring");
      } else {
        result.shards = std::move(report.accepted);
        return result;
      }
    } catch (const ParseError& e) {
      result.attempt_errors.push_back(std::string("parse: ") + e.what());
    } catch (const GatewayError& e) {
      result.attempt_errors.push_back(std::string("gateway: ") + e.what());
    }
  }
  result.excluded = true;
  result.exclusion_reason = result.attempt_errors.empty() ? "no valid segmentation" : result.attempt_errors.back();
  return result;
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw PreconditionError("quantile of empty sample");
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Distribution describe(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("describe() needs at least one value");
  std::ranges::sort(values);
  Distribution d;
  const double n = static_cast<double>(values.size());
  d.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0;
    for (double v : values) ss += (v - d.mean) * (v - d.mean);
    d.sd = std::sqrt(ss / (n - 1));
  }
  d.median = quantile_sorted(values, 0.5);
  d.q1 = quantile_sorted(values, 0.25);
  d.q3 = quantile_sorted(values, 0.75);
  return d;
}

namespace {
json to_json(const Distribution& d) {
  return {{"mean", d.mean}, {"median", d.median}, {"sd", d.sd}, {"q1", d.q1}, {"q3", d.q3}};
}
}  // namespace

json to_json(const ShardStats& stats) {
  return {{"posts", stats.posts},
          {"shards", stats.shards},
          {"count", to_json(stats.count)},
          {"share_3_to_8", stats.share_3_to_8},
          {"word_length", to_json(stats.word_length)}};
}

ShardStats shard_statistics(const std::vector<std::vector<Shard>>& shards_per_post) {
  std::vector<double> counts;
  std::vector<double> lengths;
  std::size_t in_band = 0;
  for (const auto& post : shards_per_post) {
    if (post.empty()) continue;
    counts.push_back(static_cast<double>(post.size()));
    if (post.size() >= 3 && post.size() <= 8) ++in_band;
    for (const auto& s : post) lengths.push_back(static_cast<double>(word_count(s.text)));
  }
  if (counts.empty()) throw PreconditionError("shard statistics need at least one accepted post");
  ShardStats stats;
  stats.posts = counts.size();
  stats.shards = lengths.size();
  stats.count = describe(counts);
  stats.word_length = describe(lengths);
  stats.share_3_to_8 = static_cast<double>(in_band) / static_cast<double>(counts.size());
  return stats;
}

}  // namespace ssbc
