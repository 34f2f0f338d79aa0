#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ssbc/corpus_store.hpp"
#include "ssbc/event_log.hpp"
#include "ssbc/llm_gateway.hpp"
#include "ssbc/pipeline_config.hpp"

namespace ssbc {

enum class Stage { ingest, shard, simulate, annotate, consensus, probe_train, probe_infer, analyze, report };

/// Fixed topological order used by `run all`.
inline constexpr std::array<Stage, 9> kStages{Stage::ingest,     Stage::shard,       Stage::simulate,
                                              Stage::annotate,   Stage::consensus,   Stage::probe_train,
                                              Stage::probe_infer, Stage::analyze,    Stage::report};

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);
std::vector<Stage> dependencies(Stage stage);

class DependencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageOutcome {
  Stage stage{};
  bool skipped = false;  // inputs unchanged since the last completed run
  std::string summary;
};

struct PipelineOptions {
  bool force = false;
  bool echo_log = false;
  /// Optional report extras.
  std::optional<std::string> compare_run;
  std::optional<std::string> vignette_conv;
  /// Transport used by the gateway; defaults to the HTTP client.
  std::function<std::unique_ptr<HttpTransport>()> transport_factory;
};

/// Runs the audit stages over one run directory. Each completed stage
/// records a content hash of its inputs in the manifest; rerunning a stage
/// whose hash is unchanged is a no-op unless forced.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, PipelineOptions options = {});
  ~Pipeline();

  /// Throws DependencyError when an upstream stage has not completed.
  StageOutcome run_stage(Stage stage);
  std::vector<StageOutcome> run_all();

  /// Recomputes the ensemble from stored layer metrics with a new K.
  StageOutcome select_probes(std::size_t k);

  /// Stability metrics across the three annotation runs and, when a human
  /// label file is given, agreement with that rater.
  StageOutcome agreement(const std::optional<std::filesystem::path>& human_labels);

  const RunStore& store() const { return store_; }
  const PipelineConfig& config() const { return config_; }
  GatewayCounters counters() const;
  EventLog& log() { return *log_; }

 private:
  struct Impl;
  std::string stage_hash(Stage stage) const;
  std::string run_body(Stage stage);

  PipelineConfig config_;
  PipelineOptions options_;
  RunStore store_;
  std::unique_ptr<EventLog> log_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace ssbc
