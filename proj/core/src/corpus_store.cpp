#include "ssbc/corpus_store.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace ssbc {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kManifestFile = "manifest.json";
constexpr std::array<std::string_view, 9> kKinds{"corpus", "shards", "conversations", "single_turn", "annotations",
                                                 "probes", "stats",  "reports",       "cache"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

// Record ids become file stems; anything outside [A-Za-z0-9._-] is %XX-escaped.
std::string file_stem(std::string_view record_id) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : record_id) {
    if (std::isalnum(c) || c == '-' || c == '_' || (c == '.' && !out.empty())) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(kHex[c >> 4]);
      out.push_back(kHex[c & 0xF]);
    }
  }
  if (out.empty()) throw PreconditionError("empty record id");
  return out;
}

std::string unescape_stem(std::string_view stem) {
  std::string out;
  for (std::size_t i = 0; i < stem.size(); ++i) {
    if (stem[i] == '%' && i + 2 < stem.size()) {
      out.push_back(static_cast<char>(std::stoi(std::string(stem.substr(i + 1, 2)), nullptr, 16)));
      i += 2;
    } else {
      out.push_back(stem[i]);
    }
  }
  return out;
}

}  // namespace

json to_json(const Post& post) {
  json j{{"post_id", post.post_id},
         {"community", post.community},
         {"title", post.title},
         {"body", post.body}};
  if (post.human_distress) j["human_distress"] = to_string(*post.human_distress);
  return j;
}

Post post_from_json(const json& record) {
  if (!record.is_object()) throw ParseError("post record is not an object");
  Post post;
  const auto require_string = [&](const char* key) -> std::string {
    auto it = record.find(key);
    if (it == record.end() || !it->is_string()) {
      throw ParseError(std::string("missing or non-string field '") + key + "'");
    }
    return it->get<std::string>();
  };
  post.post_id = require_string("post_id");
  if (post.post_id.empty()) throw ParseError("empty post_id");
  post.community = require_string("community");
  post.body = require_string("body");
  if (auto it = record.find("title"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("non-string title");
    post.title = it->get<std::string>();
  }
  if (auto it = record.find("human_distress"); it != record.end() && !it->is_null()) {
    if (!it->is_string()) throw ParseError("non-string human_distress");
    post.human_distress = parse_distress_level(it->get<std::string>());
    if (!post.human_distress) throw ParseError("unknown human_distress '" + it->get<std::string>() + "'");
  }
  return post;
}

json to_json(const CorpusStats& stats) {
  json issues = json::array();
  for (const auto& i : stats.issues) {
    issues.push_back({{"line", i.line}, {"post_id", i.post_id}, {"reason", i.reason}});
  }
  return {{"conversations_per_community", stats.conversations_per_community},
          {"total_posts", stats.total_posts},
          {"total_excluded", stats.total_excluded},
          {"record_errors", stats.record_errors},
          {"issues", issues}};
}

IngestResult parse_corpus(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read corpus file " + path.string());

  IngestResult result;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    Post post;
    try {
      post = post_from_json(json::parse(line));
    } catch (const std::exception&) {
      ++result.stats.record_errors;
      result.stats.issues.push_back({line_no, "", "malformed"});
      continue;
    }
    if (!seen.insert(post.post_id).second) {
      ++result.stats.record_errors;
      result.stats.issues.push_back({line_no, post.post_id, "duplicate_post_id"});
      continue;
    }
    if (trim(post.body).empty()) {
      ++result.stats.total_excluded;
      result.stats.issues.push_back({line_no, post.post_id, "empty_body"});
      continue;
    }
    ++result.stats.total_posts;
    ++result.stats.conversations_per_community[post.community];
    result.posts.push_back(std::move(post));
  }
  if (in.bad()) throw IoError("read error on " + path.string());
  return result;
}

json to_json(const RunManifest& manifest) {
  return {{"run_id", manifest.run_id},
          {"stage_versions", manifest.stage_versions},
          {"config_snapshot", manifest.config_snapshot}};
}

RunManifest manifest_from_json(const json& record) {
  RunManifest m;
  m.run_id = record.at("run_id").get<std::string>();
  m.stage_versions = record.value("stage_versions", std::map<std::string, std::string>{});
  m.config_snapshot = record.value("config_snapshot", json::object());
  return m;
}

RunStore::RunStore(fs::path dir, std::string run_id) : dir_(std::move(dir)), run_id_(std::move(run_id)) {}

RunStore RunStore::create(const fs::path& runs_root, const std::string& run_id,
                          const json& config_snapshot) {
  if (run_id.empty()) throw PreconditionError("empty run id");
  RunStore store(runs_root / file_stem(run_id), run_id);
  std::error_code ec;
  for (auto kind : kKinds) {
    fs::create_directories(store.dir_ / kind, ec);
    if (ec) throw IoError("cannot create " + (store.dir_ / kind).string() + ": " + ec.message());
  }
  RunManifest manifest;
  if (fs::exists(store.dir_ / kManifestFile)) manifest = store.manifest();
  manifest.run_id = run_id;
  manifest.config_snapshot = config_snapshot;
  store.write_manifest(manifest);
  return store;
}

RunStore RunStore::open(const fs::path& runs_root, const std::string& run_id) {
  RunStore store(runs_root / file_stem(run_id), run_id);
  store.require_manifest();
  return store;
}

bool RunStore::exists(const fs::path& runs_root, const std::string& run_id) {
  return fs::exists(runs_root / file_stem(run_id) / kManifestFile);
}

void RunStore::require_manifest() const {
  if (!fs::exists(dir_ / kManifestFile)) {
    throw StoreError("manifest missing for run '" + run_id_ + "'");
  }
}

fs::path RunStore::kind_dir(std::string_view kind) const { return dir_ / kind; }

RunManifest RunStore::manifest() const {
  require_manifest();
  return manifest_from_json(json::parse(read_file(dir_ / kManifestFile)));
}

void RunStore::write_manifest(const RunManifest& manifest) const {
  atomic_write(dir_ / kManifestFile, to_json(manifest).dump(2) + "\n");
}

void RunStore::set_stage_version(const std::string& stage, const std::string& hash) const {
  auto m = manifest();
  m.stage_versions[stage] = hash;
  write_manifest(m);
}

std::optional<std::string> RunStore::stage_version(const std::string& stage) const {
  auto m = manifest();
  auto it = m.stage_versions.find(stage);
  if (it == m.stage_versions.end()) return std::nullopt;
  return it->second;
}

fs::path RunStore::artifact_path(std::string_view kind, std::string_view record_id) const {
  return dir_ / kind / (file_stem(record_id) + ".jsonl");
}

fs::path RunStore::persist_artifact(std::string_view kind, std::string_view record_id,
                                    std::string_view payload) const {
  require_manifest();
  auto path = artifact_path(kind, record_id);
  atomic_write(path, payload);
  return path;
}

fs::path RunStore::persist_records(std::string_view kind, std::string_view record_id,
                                   const std::vector<json>& records) const {
  return persist_artifact(kind, record_id, to_jsonl(records));
}

std::vector<json> RunStore::load_records(std::string_view kind, std::string_view record_id) const {
  return read_jsonl(artifact_path(kind, record_id));
}

void RunStore::remove_artifacts(std::string_view kind) const {
  const auto dir = dir_ / kind;
  if (!fs::exists(dir)) return;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") fs::remove(entry.path());
  }
}

bool RunStore::has_artifact(std::string_view kind, std::string_view record_id) const {
  return fs::exists(artifact_path(kind, record_id));
}

std::vector<std::string> RunStore::list_artifacts(std::string_view kind) const {
  std::vector<std::string> ids;
  const auto dir = dir_ / kind;
  if (!fs::exists(dir)) return ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
      ids.push_back(unescape_stem(entry.path().stem().string()));
    }
  }
  std::ranges::sort(ids);
  return ids;
}

CorpusStats RunStore::ingest_corpus(const fs::path& corpus_path) const {
  require_manifest();
  auto result = parse_corpus(corpus_path);
  std::vector<json> records;
  records.reserve(result.posts.size());
  for (const auto& p : result.posts) records.push_back(to_json(p));
  persist_records("corpus", "posts", records);
  persist_artifact("corpus", "ingest_stats", canonical_dump(to_json(result.stats)) + "\n");
  return result.stats;
}

std::vector<Post> RunStore::load_posts() const {
  std::vector<Post> posts;
  for (const auto& r : load_records("corpus", "posts")) posts.push_back(post_from_json(r));
  return posts;
}

fs::path persist_artifact(const fs::path& runs_root, const std::string& run_id,
                          std::string_view kind, std::string_view record_id,
                          std::string_view payload) {
  return RunStore::open(runs_root, run_id).persist_artifact(kind, record_id, payload);
}

}  // namespace ssbc
