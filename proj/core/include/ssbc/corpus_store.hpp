#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/json_io.hpp"
#include "ssbc/types.hpp"

namespace ssbc {

struct Post {
  std::string post_id;
  std::string community;
  std::string title;
  std::string body;
  std::optional<DistressLevel> human_distress;

  friend bool operator==(const Post&, const Post&) = default;
};

json to_json(const Post& post);
Post post_from_json(const json& record);

struct IngestIssue {
  std::size_t line = 0;
  std::string post_id;
  std::string reason;  // malformed | duplicate_post_id | empty_body
};

/// Outcome of ingesting a corpus file. Every non-blank input line lands in
/// exactly one of total_posts, total_excluded or record_errors.
struct CorpusStats {
  std::map<std::string, std::size_t> conversations_per_community;
  std::size_t total_posts = 0;
  std::size_t total_excluded = 0;
  std::size_t record_errors = 0;
  std::vector<IngestIssue> issues;

  std::size_t total_records() const { return total_posts + total_excluded + record_errors; }
};

json to_json(const CorpusStats& stats);

struct IngestResult {
  std::vector<Post> posts;
  CorpusStats stats;
};

/// Parses a line-delimited corpus file. Malformed lines and duplicate ids are
/// counted, never fatal; an unreadable file throws IoError.
IngestResult parse_corpus(const std::filesystem::path& path);

struct RunManifest {
  std::string run_id;
  std::map<std::string, std::string> stage_versions;
  json config_snapshot = json::object();
};

json to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const json& record);

class StoreError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Owns the layout of one run directory:
///   runs/<run_id>/{manifest.json, corpus/, shards/, conversations/,
///                  single_turn/, annotations/, probes/, stats/, reports/, cache/}
/// Single writer per run; every write is temp-then-rename.
class RunStore {
 public:
  static RunStore create(const std::filesystem::path& runs_root, const std::string& run_id,
                         const json& config_snapshot);
  static RunStore open(const std::filesystem::path& runs_root, const std::string& run_id);
  static bool exists(const std::filesystem::path& runs_root, const std::string& run_id);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path kind_dir(std::string_view kind) const;

  RunManifest manifest() const;
  void write_manifest(const RunManifest& manifest) const;
  void set_stage_version(const std::string& stage, const std::string& hash) const;
  std::optional<std::string> stage_version(const std::string& stage) const;

  /// runs/<run_id>/<kind>/<record_id>.jsonl
  std::filesystem::path artifact_path(std::string_view kind, std::string_view record_id) const;

  std::filesystem::path persist_artifact(std::string_view kind, std::string_view record_id,
                                         std::string_view payload) const;
  std::filesystem::path persist_records(std::string_view kind, std::string_view record_id,
                                        const std::vector<json>& records) const;
  std::vector<json> load_records(std::string_view kind, std::string_view record_id) const;
  bool has_artifact(std::string_view kind, std::string_view record_id) const;
  /// Deletes every record file of a kind (used before a stage rewrites it).
  void remove_artifacts(std::string_view kind) const;
  /// Record ids (file stems) stored under a kind, sorted.
  std::vector<std::string> list_artifacts(std::string_view kind) const;

  /// Ingests a corpus into corpus/posts.jsonl. Re-ingesting the same file
  /// produces byte-identical stored records.
  CorpusStats ingest_corpus(const std::filesystem::path& corpus_path) const;
  std::vector<Post> load_posts() const;

 private:
  RunStore(std::filesystem::path dir, std::string run_id);
  void require_manifest() const;

  std::filesystem::path dir_;
  std::string run_id_;
};

/// Free-function form of RunStore::persist_artifact: fails with
/// "manifest missing" when the run has not been created.
std::filesystem::path persist_artifact(const std::filesystem::path& runs_root,
                                       const std::string& run_id, std::string_view kind,
                                       std::string_view record_id, std::string_view payload);

}  // namespace ssbc
