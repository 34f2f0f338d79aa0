#include "ssbc/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "ssbc/agreement.hpp"
#include "ssbc/distress_probe.hpp"
#include "ssbc/hashing.hpp"
#include "ssbc/hidden_state_client.hpp"
#include "ssbc/hsd_format.hpp"
#include "ssbc/parallel.hpp"
#include "ssbc/prefix_dataset.hpp"
#include "ssbc/report_builder.hpp"
#include "ssbc/shard_engine.hpp"
#include "ssbc/ssbc_annotator.hpp"
#include "ssbc/stats/per_tag.hpp"
#include "ssbc/stats/tidy.hpp"

namespace ssbc {

namespace fs = std::filesystem;

namespace {

// Bump when a stage's output format or semantics change.
constexpr int kStageVersion = 1;

struct StageInfo {
  Stage stage;
  std::string_view name;
  std::vector<Stage> deps;
};

const std::vector<StageInfo>& stage_table() {
  static const std::vector<StageInfo> table{
      {Stage::ingest, "ingest", {}},
      {Stage::shard, "shard", {Stage::ingest}},
      {Stage::simulate, "simulate", {Stage::shard}},
      {Stage::annotate, "annotate", {Stage::simulate}},
      {Stage::consensus, "consensus", {Stage::annotate}},
      {Stage::probe_train, "probe-train", {}},
      {Stage::probe_infer, "probe-infer", {Stage::probe_train, Stage::simulate}},
      {Stage::analyze, "analyze", {Stage::consensus, Stage::probe_infer}},
      {Stage::report, "report", {Stage::analyze}},
  };
  return table;
}

std::string file_digest(const fs::path& path) {
  if (path.empty()) return "";
  return sha256_hex(read_file(path));
}

std::string temp_tag(double t) { return format_number(t); }

std::vector<Conversation> load_conversations(const RunStore& store) {
  std::vector<Conversation> out;
  for (const auto& id : store.list_artifacts("conversations")) {
    for (const auto& r : store.load_records("conversations", id)) out.push_back(conversation_from_json(r));
  }
  return out;
}

std::vector<SingleTurnResult> load_single_turns(const RunStore& store) {
  std::vector<SingleTurnResult> out;
  for (const auto& id : store.list_artifacts("single_turn")) {
    for (const auto& r : store.load_records("single_turn", id)) out.push_back(single_turn_from_json(r));
  }
  return out;
}

std::map<TurnKey, LabelSet> load_consensus(const RunStore& store) {
  std::map<TurnKey, LabelSet> out;
  for (const auto& r : store.load_records("annotations", "consensus")) {
    auto [key, rec] = consensus_from_json(r);
    out.emplace(std::move(key), rec.labels);
  }
  return out;
}

std::map<std::string, LabelSet> load_single_consensus(const RunStore& store) {
  std::map<std::string, LabelSet> out;
  if (!store.has_artifact("annotations", "single_consensus")) return out;
  for (const auto& r : store.load_records("annotations", "single_consensus")) {
    out.emplace(r.at("post_id").get<std::string>(), label_set_from_json(r.at("labels")));
  }
  return out;
}

json to_json(const DistressEstimate& e) {
  return {{"level", to_string(e.level)}, {"probabilities", e.probabilities}};
}

// temperatures the annotate stage actually used; a --temps override on that
// invocation need not match the config seen later
std::vector<double> annotated_temperatures(const RunStore& store) {
  return store.load_records("stats", "annotator").at(0).at("temperatures").get<std::vector<double>>();
}

std::map<TurnKey, DistressEstimate> load_estimates(const RunStore& store) {
  std::map<TurnKey, DistressEstimate> out;
  for (const auto& r : store.load_records("probes", "estimates")) {
    DistressEstimate e;
    e.level = parse_distress_level(r.at("level").get<std::string>()).value();
    e.probabilities = r.at("probabilities").get<std::array<double, 3>>();
    out[{r.at("conv_id").get<std::string>(), r.at("turn").get<std::size_t>()}] = e;
  }
  return out;
}

std::vector<LayerEvaluation> load_layer_metrics(const RunStore& store) {
  std::vector<LayerEvaluation> out;
  for (const auto& r : store.load_records("probes", "layer_metrics")) {
    out.push_back({r.at("layer").get<std::uint16_t>(), classification_metrics_from_json(r.at("metrics"))});
  }
  return out;
}

void write_table(const RunStore& store, const std::string& name, const Table& table) {
  const auto dir = store.kind_dir("reports");
  atomic_write(dir / (name + ".csv"), render_csv(table));
  atomic_write(dir / (name + ".md"), render_markdown(table));
}

std::string plural(std::size_t n, std::string_view word) {
  return std::to_string(n) + " " + std::string(word) + (n == 1 ? "" : "s");
}

}  // namespace

std::string_view to_string(Stage stage) {
  for (const auto& s : stage_table()) {
    if (s.stage == stage) return s.name;
  }
  return "?";
}

std::optional<Stage> parse_stage(std::string_view text) {
  for (const auto& s : stage_table()) {
    if (s.name == text) return s.stage;
  }
  if (text == "probe_train") return Stage::probe_train;
  if (text == "probe_infer") return Stage::probe_infer;
  return std::nullopt;
}

std::vector<Stage> dependencies(Stage stage) {
  for (const auto& s : stage_table()) {
    if (s.stage == stage) return s.deps;
  }
  return {};
}

struct Pipeline::Impl {
  std::shared_ptr<ResponseCache> cache;
  std::unique_ptr<LlmGateway> gateway;
};

Pipeline::Pipeline(PipelineConfig config, PipelineOptions options)
    : config_((validate(config), std::move(config))),
      options_(std::move(options)),
      store_(RunStore::create(config_.runs_root, config_.run_id, to_json(config_))),
      log_(std::make_unique<EventLog>(store_.dir() / "events.jsonl", config_.run_id)),
      impl_(std::make_unique<Impl>()) {
  log_->set_echo(options_.echo_log);

  GatewayOptions gw;
  gw.retry.max_retries = config_.gateway.max_retries;
  gw.retry.base_delay = std::chrono::milliseconds(config_.gateway.base_delay_ms);
  gw.retry.max_delay = std::chrono::milliseconds(config_.gateway.max_delay_ms);
  gw.retry.seed = config_.seed;
  gw.timeout = std::chrono::milliseconds(config_.gateway.timeout_ms);
  gw.concurrency = config_.gateway.concurrency;
  gw.rate_limit_rps = config_.gateway.rate_limit_rps;
  gw.offline = config_.gateway.offline;
  const auto env = process_env();
  for (const auto& [alias, spec] : config_.endpoints) {
    if (spec.api_key_env.empty()) continue;
    if (auto key = env(spec.api_key_env)) gw.api_keys[spec.url] = *key;
  }
  impl_->cache = std::make_shared<ResponseCache>(store_.kind_dir("cache"));
  auto transport = options_.transport_factory ? options_.transport_factory() : make_http_transport();
  impl_->gateway = std::make_unique<LlmGateway>(std::move(gw), impl_->cache, std::move(transport));
  impl_->gateway->set_log(log_.get());
}

Pipeline::~Pipeline() = default;

GatewayCounters Pipeline::counters() const { return impl_->gateway->counters(); }

std::string Pipeline::stage_hash(Stage stage) const {
  const auto cfg = to_json(config_);
  json j{{"stage", to_string(stage)}, {"version", kStageVersion}};
  json upstream = json::object();
  for (auto dep : dependencies(stage)) {
    upstream[std::string(to_string(dep))] = store_.stage_version(std::string(to_string(dep))).value_or("");
  }
  j["upstream"] = upstream;
  auto url = [&](const std::string& alias) { return alias.empty() ? std::string{} : resolve_endpoint(config_, alias); };
  switch (stage) {
    case Stage::ingest:
      j["corpus"] = file_digest(config_.corpus);
      break;
    case Stage::shard:
      j["config"] = cfg.at("shard_teacher");
      j["url"] = url(config_.shard_teacher.endpoint);
      j["seed"] = config_.seed;
      break;
    case Stage::simulate:
      j["config"] = cfg.at("agent");
      j["url"] = url(config_.agent.endpoint);
      break;
    case Stage::annotate:
      j["config"] = cfg.at("annotator");
      j["url"] = url(config_.annotator.endpoint);
      j["seed"] = config_.seed;
      j["include_partial"] = config_.analysis.include_partial;
      break;
    case Stage::consensus:
      j["temperatures"] = config_.annotator.temperatures;
      break;
    case Stage::probe_train: {
      auto probe = cfg.at("probe");
      probe["hsd"] = file_digest(config_.probe.hsd);
      probe["dialogues"] = file_digest(config_.probe.dialogues);
      j["config"] = probe;
      j["seed"] = config_.seed;
      if (config_.probe.hsd.empty()) {
        j["teacher"] = cfg.at("distress_teacher");
        j["teacher_url"] = url(config_.distress_teacher.endpoint);
        j["hidden_states"] = cfg.at("hidden_states");
        j["hidden_states_url"] = url(config_.hidden_states.endpoint);
      }
      break;
    }
    case Stage::probe_infer:
      j["hidden_states"] = cfg.at("hidden_states");
      j["url"] = url(config_.hidden_states.endpoint);
      j["ensemble"] = store_.has_artifact("probes", "ensemble")
                          ? file_digest(store_.artifact_path("probes", "ensemble"))
                          : std::string{};
      break;
    case Stage::analyze:
      j["config"] = cfg.at("analysis");
      break;
    case Stage::report:
      j["compare"] = options_.compare_run.value_or("");
      j["vignette"] = options_.vignette_conv.value_or("");
      if (options_.compare_run) {
        const auto other = RunStore::open(config_.runs_root, *options_.compare_run);
        if (other.has_artifact("stats", "prevalence")) {
          j["compare_prevalence"] = file_digest(other.artifact_path("stats", "prevalence"));
        }
      }
      break;
  }
  return sha256_hex(canonical_dump(j));
}

StageOutcome Pipeline::run_stage(Stage stage) {
  const std::string name(to_string(stage));
  for (auto dep : dependencies(stage)) {
    if (!store_.stage_version(std::string(to_string(dep)))) {
      throw DependencyError("stage '" + name + "' requires '" + std::string(to_string(dep)) +
                            "', which has not completed for run '" + store_.run_id() + "'");
    }
  }
  log_->set_stage(name);
  const auto hash = stage_hash(stage);
  // recorded as <input hash>.<epoch>; the epoch advances on every execution so
  // downstream stages, which hash the full token, go stale after a forced rerun
  const auto previous = store_.stage_version(name);
  if (!options_.force && previous && previous->substr(0, previous->find('.')) == hash) {
    log_->emit("stage_skipped", {{"hash", hash}});
    return {stage, true, "skipped (up to date)"};
  }
  log_->emit("stage_start", {{"hash", hash}});
  const auto started = std::chrono::steady_clock::now();
  std::string summary;
  try {
    summary = run_body(stage);
  } catch (const std::exception& e) {
    log_->emit("stage_failed", {{"error", e.what()}});
    throw;
  }
  const auto elapsed =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  std::uint64_t epoch = 1;
  if (previous) {
    if (const auto dot = previous->find('.'); dot != std::string::npos) epoch = std::stoull(previous->substr(dot + 1)) + 1;
  }
  store_.set_stage_version(name, hash + "." + std::to_string(epoch));
  log_->emit("stage_complete", {{"summary", summary}, {"duration_ms", elapsed}});
  return {stage, false, summary};
}

std::vector<StageOutcome> Pipeline::run_all() {
  std::vector<StageOutcome> out;
  for (auto stage : kStages) out.push_back(run_stage(stage));
  return out;
}

std::string Pipeline::run_body(Stage stage) {
  auto& gateway = *impl_->gateway;
  const auto concurrency = config_.gateway.concurrency;

  switch (stage) {
    case Stage::ingest: {
      if (config_.corpus.empty()) throw ConfigError("config has no corpus path");
      const auto stats = store_.ingest_corpus(config_.corpus);
      store_.persist_records("stats", "corpus", {to_json(stats)});
      return plural(stats.total_posts, "post") + " ingested, " + std::to_string(stats.total_excluded) +
             " excluded, " + std::to_string(stats.record_errors) + " record errors";
    }

    case Stage::shard: {
      const auto posts = store_.load_posts();
      ShardTeacherConfig teacher{resolve_endpoint(config_, config_.shard_teacher.endpoint),
                                 config_.shard_teacher.model,
                                 config_.shard_teacher.temperature,
                                 config_.shard_teacher.max_tokens,
                                 config_.shard_teacher.max_attempts,
                                 static_cast<std::int64_t>(config_.seed)};
      const ShardValidator validator;
      std::vector<ShardExtraction> results(posts.size());
      parallel_for(posts.size(), concurrency,
                   [&](std::size_t i) { results[i] = extract_shards(posts[i], gateway, teacher, validator); });

      store_.remove_artifacts("shards");
      std::vector<json> extraction_records;
      std::vector<std::vector<Shard>> accepted;
      std::size_t excluded = 0;
      for (const auto& r : results) {
        extraction_records.push_back(to_json(r));
        if (r.excluded) {
          ++excluded;
          log_->emit("post_excluded", {{"post_id", r.post_id}, {"reason", r.exclusion_reason}});
          continue;
        }
        std::vector<json> records;
        for (const auto& s : r.shards) records.push_back(to_json(s));
        store_.persist_records("shards", r.post_id, records);
        accepted.push_back(r.shards);
      }
      store_.persist_records("stats", "shard_extraction", extraction_records);
      if (!accepted.empty()) {
        store_.persist_records("stats", "shard_stats", {to_json(shard_statistics(accepted))});
      }
      return plural(accepted.size(), "post") + " segmented, " + std::to_string(excluded) + " excluded";
    }

    case Stage::simulate: {
      const auto posts = store_.load_posts();
      std::vector<std::vector<Shard>> shards;
      std::vector<const Post*> post_of;
      for (const auto& id : store_.list_artifacts("shards")) {
        std::vector<Shard> s;
        for (const auto& r : store_.load_records("shards", id)) s.push_back(shard_from_json(r));
        auto it = std::ranges::find(posts, id, &Post::post_id);
        if (it == posts.end()) throw ConsistencyError("shards for unknown post " + id);
        shards.push_back(std::move(s));
        post_of.push_back(&*it);
      }
      AgentConfig agent{resolve_endpoint(config_, config_.agent.endpoint), config_.agent.model,
                        config_.agent.temperature,                           config_.agent.max_tokens,
                        config_.agent.seed,                                  config_.agent.system_prompt};
      std::vector<Conversation> convs(shards.size());
      parallel_for(shards.size(), concurrency,
                   [&](std::size_t i) { convs[i] = simulate_conversation(shards[i], agent, gateway); });

      store_.remove_artifacts("conversations");
      std::size_t partial = 0;
      for (const auto& c : convs) {
        if (!c.complete) {
          ++partial;
          log_->emit("conversation_partial", {{"conv_id", c.conv_id}, {"failure", c.failure}});
        }
        store_.persist_records("conversations", c.conv_id, {to_json(c)});
      }

      store_.remove_artifacts("single_turn");
      std::size_t singles = 0;
      if (config_.agent.single_turn) {
        std::vector<std::optional<SingleTurnResult>> single(post_of.size());
        std::vector<std::string> errors(post_of.size());
        parallel_for(post_of.size(), concurrency, [&](std::size_t i) {
          single[i] = simulate_single_turn(*post_of[i], agent, gateway, &errors[i]);
        });
        for (std::size_t i = 0; i < single.size(); ++i) {
          if (!single[i]) {
            log_->emit("single_turn_failed", {{"post_id", post_of[i]->post_id}, {"error", errors[i]}});
            continue;
          }
          store_.persist_records("single_turn", single[i]->post_id, {to_json(*single[i])});
          ++singles;
        }
      }
      return plural(convs.size(), "conversation") + " (" + std::to_string(partial) + " partial), " +
             std::to_string(singles) + " single-turn replies";
    }

    case Stage::annotate: {
      auto convs = load_conversations(store_);
      std::vector<Conversation> eligible;
      for (auto& c : convs) {
        if (c.turns.empty()) continue;
        if (!c.complete) {
          if (!config_.analysis.include_partial) continue;
          c.complete = true;  // only its completed turns are annotated
        }
        eligible.push_back(std::move(c));
      }
      AnnotatorConfig annotator{resolve_endpoint(config_, config_.annotator.endpoint), config_.annotator.model,
                                config_.annotator.max_tokens, static_cast<std::int64_t>(config_.seed), concurrency};
      const auto singles = load_single_turns(store_);
      store_.remove_artifacts("annotations");
      std::size_t failures = 0;
      std::size_t turns = 0;
      for (double t : config_.annotator.temperatures) {
        const auto run = annotate_run(eligible, t, gateway, annotator);
        for (const auto& [key, ann] : run.turns) {
          if (ann.status != AnnotationStatus::ok) {
            ++failures;
            log_->emit("annotation_flagged",
                       {{"conv_id", key.conv_id}, {"turn", key.turn}, {"temperature", t}, {"status", to_string(ann.status)}});
          }
        }
        turns = run.turns.size();
        store_.persist_records("annotations", "run_T" + temp_tag(t), annotation_records(run));
        store_.persist_records("annotations", "raw_T" + temp_tag(t), raw_response_records(run));

        std::vector<TurnAnnotation> single_ann(singles.size());
        parallel_for(singles.size(), concurrency, [&](std::size_t i) {
          single_ann[i] = annotate_exchange(singles[i].prompt_text, singles[i].assistant_text, t, gateway, annotator);
        });
        std::vector<json> single_records;
        for (std::size_t i = 0; i < singles.size(); ++i) {
          single_records.push_back({{"post_id", singles[i].post_id},
                                    {"temperature", t},
                                    {"labels", to_json(single_ann[i].labels)},
                                    {"status", to_string(single_ann[i].status)}});
        }
        store_.persist_records("annotations", "single_T" + temp_tag(t), single_records);
      }
      store_.persist_records("stats", "annotator",
                             {{{"hash", annotator_hash(annotator, config_.annotator.temperatures)},
                               {"temperatures", config_.annotator.temperatures},
                               {"model", config_.annotator.model}}});
      return plural(turns, "turn") + " x " + std::to_string(config_.annotator.temperatures.size()) +
             " runs annotated, " + std::to_string(failures) + " flagged";
    }

    case Stage::consensus: {
      const auto temps = annotated_temperatures(store_);
      std::vector<AnnotationRun> runs;
      for (double t : temps) {
        runs.push_back(annotation_run_from_records(store_.load_records("annotations", "run_T" + temp_tag(t)),
                                                   store_.load_records("annotations", "raw_T" + temp_tag(t))));
      }
      const auto merged = consensus({&runs[0], &runs[1], &runs[2]});
      std::vector<json> records;
      for (const auto& [key, rec] : merged) records.push_back(to_json(key, rec));
      store_.persist_records("annotations", "consensus", records);

      std::vector<const AnnotationRun*> ptrs;
      for (const auto& r : runs) ptrs.push_back(&r);
      if (!merged.empty()) {
        store_.persist_records("stats", "agreement", {to_json(agreement_metrics(ptrs), temps)});
      }

      // single-turn replies: same two-of-three rule
      std::map<std::string, std::array<LabelMask, 3>> single;
      for (std::size_t i = 0; i < temps.size(); ++i) {
        if (!store_.has_artifact("annotations", "single_T" + temp_tag(temps[i]))) continue;
        for (const auto& r : store_.load_records("annotations", "single_T" + temp_tag(temps[i]))) {
          single[r.at("post_id").get<std::string>()][i] = label_set_from_json(r.at("labels")).mask();
        }
      }
      std::vector<json> single_records;
      for (const auto& [post_id, masks] : single) {
        const auto rec = consensus_of(masks);
        auto j = to_json(TurnKey{post_id, 0}, rec);
        single_records.push_back({{"post_id", post_id}, {"labels", j.at("labels")}, {"votes", j.at("votes")}});
      }
      store_.persist_records("annotations", "single_consensus", single_records);
      return plural(merged.size(), "turn") + " with consensus, " + std::to_string(single_records.size()) +
             " single-turn replies";
    }

    case Stage::probe_train: {
      std::vector<HiddenStateRecord> records;
      if (!config_.probe.hsd.empty()) {
        records = read_hsd(config_.probe.hsd);
      } else if (!config_.probe.dialogues.empty()) {
        const auto dialogues = read_dialogues(config_.probe.dialogues);
        DistressTeacherConfig teacher{resolve_endpoint(config_, config_.distress_teacher.endpoint),
                                      config_.distress_teacher.model, config_.distress_teacher.temperature,
                                      config_.distress_teacher.max_tokens, static_cast<std::int64_t>(config_.seed)};
        const auto dataset = build_prefix_dataset(dialogues, gateway, teacher, config_.seed, concurrency);
        std::vector<json> prefix_records;
        for (const auto& p : dataset.prefixes) prefix_records.push_back(to_json(p));
        store_.persist_records("probes", "prefixes", prefix_records);
        log_->emit("prefix_dataset", {{"prefixes", dataset.prefixes.size()}, {"dropped", dataset.dropped}});

        HiddenStateClient client(gateway, resolve_endpoint(config_, config_.hidden_states.endpoint));
        std::vector<ExtractionResponse> responses(dataset.prefixes.size());
        parallel_for(dataset.prefixes.size(), concurrency, [&](std::size_t i) {
          ExtractionRequest req{config_.hidden_states.model_id, dataset.prefixes[i].messages, {}, true};
          responses[i] = client.extract(req);
        });
        for (std::size_t i = 0; i < responses.size(); ++i) {
          const auto& p = dataset.prefixes[i];
          for (const auto& l : responses[i].layers) records.push_back({p.record_id, p.group_id, l.index, p.label, l.vector});
        }
        write_hsd(store_.kind_dir("probes") / "train.hsd", records);
      } else {
        throw ConfigError("probe-train needs probe.hsd or probe.dialogues");
      }

      ProbeTrainingConfig training;
      training.hyper.l2 = config_.probe.l2;
      training.hyper.max_iterations = config_.probe.max_iterations;
      training.folds = config_.probe.folds;
      training.seed = config_.seed;
      if (config_.probe.min_layer) training.min_layer = static_cast<std::uint16_t>(*config_.probe.min_layer);
      if (config_.probe.max_layer) training.max_layer = static_cast<std::uint16_t>(*config_.probe.max_layer);
      training.concurrency = concurrency;
      const auto evaluations = evaluate_layers(records, training);
      std::vector<json> metric_records;
      for (const auto& e : evaluations) metric_records.push_back({{"layer", e.layer}, {"metrics", to_json(e.metrics)}});
      store_.persist_records("probes", "layer_metrics", metric_records);
      const auto ensemble = build_ensemble(records, evaluations, config_.probe.k, training.hyper);
      store_.persist_records("probes", "ensemble", {to_json(ensemble)});

      std::string layers;
      for (const auto& m : ensemble.members) layers += (layers.empty() ? "" : ",") + std::to_string(m.layer);
      return plural(evaluations.size(), "layer") + " evaluated; ensemble layers " + layers + " (best macro-F1 " +
             format_number(ensemble.members.front().cv_metrics.macro_f1) + ")";
    }

    case Stage::probe_infer: {
      const auto ensemble = ensemble_from_json(store_.load_records("probes", "ensemble").at(0));
      std::vector<std::uint16_t> layers;
      for (const auto& m : ensemble.members) layers.push_back(m.layer);
      std::ranges::sort(layers);

      AgentConfig agent{resolve_endpoint(config_, config_.agent.endpoint), config_.agent.model,
                        config_.agent.temperature,                           config_.agent.max_tokens,
                        config_.agent.seed,                                  config_.agent.system_prompt};
      const auto convs = load_conversations(store_);
      struct Job {
        const Conversation* conv;
        std::size_t pos;
      };
      std::vector<Job> jobs;
      for (const auto& c : convs) {
        for (std::size_t i = 0; i < c.turns.size(); ++i) jobs.push_back({&c, i});
      }
      HiddenStateClient client(gateway, resolve_endpoint(config_, config_.hidden_states.endpoint));
      std::vector<DistressEstimate> estimates(jobs.size());
      parallel_for(jobs.size(), concurrency, [&](std::size_t i) {
        const auto& conv = *jobs[i].conv;
        const auto& turn = conv.turns[jobs[i].pos];
        const std::vector<Turn> history(conv.turns.begin(), conv.turns.begin() + static_cast<std::ptrdiff_t>(jobs[i].pos));
        auto messages = turn_messages(agent, history, turn.user_text);
        if (config_.hidden_states.include_reply) messages.push_back({Role::assistant, turn.assistant_text});
        const auto resp = client.extract({config_.hidden_states.model_id, std::move(messages), layers, false});
        std::map<std::uint16_t, std::vector<float>> vectors;
        for (auto l : layers) vectors[l] = *resp.find(l);
        estimates[i] = ensemble_predict(ensemble, vectors);
      });

      std::vector<json> records;
      std::map<std::string, DistressLevel> human;
      for (const auto& p : store_.load_posts()) {
        if (p.human_distress) human[p.post_id] = *p.human_distress;
      }
      std::vector<DistressPair> pairs;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        auto r = to_json(estimates[i]);
        r["conv_id"] = jobs[i].conv->conv_id;
        r["turn"] = jobs[i].conv->turns[jobs[i].pos].index;
        records.push_back(std::move(r));
        if (auto it = human.find(jobs[i].conv->post_id); it != human.end()) {
          pairs.push_back({estimates[i].level, it->second});
        }
      }
      store_.persist_records("probes", "estimates", records);
      std::string extra;
      if (!pairs.empty()) {
        const auto cmp = compare_with_human(pairs);
        store_.persist_records("stats", "distress_human", {to_json(cmp)});
        extra = "; exact match with human labels " + format_number(cmp.exact_match_rate);
      } else {
        std::error_code ec;
        fs::remove(store_.artifact_path("stats", "distress_human"), ec);
      }
      return plural(jobs.size(), "turn") + " estimated" + extra;
    }

    case Stage::analyze: {
      std::map<std::string, Post> posts;
      for (auto& p : store_.load_posts()) posts.emplace(p.post_id, std::move(p));
      auto convs = load_conversations(store_);
      const auto labels = load_consensus(store_);
      const auto estimates = load_estimates(store_);
      for (auto& c : convs) {
        for (auto& t : c.turns) {
          const TurnKey key{c.conv_id, t.index};
          if (auto it = labels.find(key); it != labels.end()) t.consensus_labels = it->second;
          if (auto it = estimates.find(key); it != estimates.end()) t.distress_estimate = it->second;
        }
      }
      const auto tidy = stats::build_tidy(convs, posts, config_.analysis.include_partial);
      if (tidy.empty()) throw PreconditionError("no annotated turns to analyze");
      atomic_write(store_.kind_dir("stats") / "tidy.csv", stats::tidy_csv(tidy));

      std::vector<LabelSet> sets;
      for (const auto& r : tidy) sets.push_back(LabelSet::from_mask(r.tags));
      store_.persist_records("stats", "prevalence", {to_json(prevalence_report(sets))});

      stats::AnalysisOptions opts;
      opts.reference_community = config_.analysis.reference_community;
      opts.turn_coding = stats::parse_turn_coding(config_.analysis.turn_coding);
      opts.q = config_.analysis.q;
      opts.concurrency = concurrency;
      const auto method = stats::parse_method(config_.analysis.regression_method);

      std::size_t significant = 0;
      for (auto cond : {stats::Condition::distress, stats::Condition::community}) {
        const std::string suffix(stats::to_string(cond));
        std::vector<json> cont;
        for (const auto& r : stats::per_tag_contingency(tidy, cond, opts)) {
          if (cond == stats::Condition::distress && r.reject) ++significant;
          cont.push_back(stats::to_json(r));
        }
        store_.persist_records("stats", "contingency_" + suffix, cont);
        std::vector<json> reg;
        for (const auto& r : stats::per_tag_regression(tidy, cond, method, opts)) reg.push_back(stats::to_json(r));
        store_.persist_records("stats", "regression_" + suffix, reg);
      }

      const auto singles = load_single_consensus(store_);
      if (!singles.empty()) {
        std::vector<LabelSet> single_sets;
        for (const auto& [id, s] : singles) single_sets.push_back(s);
        store_.persist_records("stats", "prevalence_single_turn", {to_json(prevalence_report(single_sets))});
      }
      return plural(tidy.size(), "turn") + " analyzed, " + std::to_string(significant) +
             " tags significant for distress";
    }

    case Stage::report: {
      for (const auto& entry : fs::directory_iterator(store_.kind_dir("reports"))) fs::remove(entry.path());

      std::vector<std::pair<std::string, Table>> tables;
      const auto prevalence = prevalence_from_json(store_.load_records("stats", "prevalence").at(0));
      auto prev_table = prevalence_table(prevalence);
      tables.emplace_back("prevalence", prev_table);
      if (store_.has_artifact("stats", "prevalence_single_turn")) {
        auto t = prevalence_table(prevalence_from_json(store_.load_records("stats", "prevalence_single_turn").at(0)));
        t.title = "Tag prevalence, single-turn replies";
        tables.emplace_back("prevalence_single_turn", t);
      }

      auto load_cont = [&](const std::string& id) {
        std::vector<stats::ContingencyResult> out;
        for (const auto& r : store_.load_records("stats", id)) out.push_back(stats::contingency_from_json(r));
        return out;
      };
      auto load_reg = [&](const std::string& id) {
        std::vector<stats::RegressionResult> out;
        for (const auto& r : store_.load_records("stats", id)) out.push_back(stats::regression_from_json(r));
        return out;
      };
      tables.emplace_back("distress", distress_report(load_cont("contingency_distress")));

      const auto community_cont = load_cont("contingency_community");
      const bool multi_community = !community_cont.empty() && community_cont.front().levels.size() >= 2;
      if (multi_community) {
        auto community = community_report(community_cont, load_reg("regression_community"));
        tables.emplace_back("community", community.spread);
        tables.emplace_back("community_odds_ratios", community.odds_ratios);
      }

      if (store_.has_artifact("stats", "distress_human")) {
        const auto cmp = store_.load_records("stats", "distress_human").at(0);
        Table t{"Estimated distress against human labels", {"human", "items", "none", "mild", "moderate+"}, {}, ""};
        const auto& confusion = cmp.at("confusion");
        const auto& shares = cmp.at("row_shares");
        for (auto level : kDistressLevels) {
          const auto h = static_cast<std::size_t>(ordinal(level));
          std::size_t items = 0;
          for (std::size_t e = 0; e < 3; ++e) items += confusion.at(h).at(e).get<std::size_t>();
          std::vector<std::string> row{std::string(to_string(level)), std::to_string(items)};
          for (std::size_t e = 0; e < 3; ++e) row.push_back(format_number(shares.at(h).at(e).get<double>()));
          t.rows.push_back(std::move(row));
        }
        const auto& kappa = cmp.at("quadratic_weighted_kappa");
        t.note = "exact match " + format_number(cmp.at("exact_match_rate").get<double>()) +
                 ", quadratic-weighted kappa " + (kappa.is_null() ? std::string("undefined") : format_number(kappa.get<double>()));
        tables.emplace_back("distress_human", t);
      }

      if (options_.compare_run) {
        const auto other = RunStore::open(config_.runs_root, *options_.compare_run);
        const auto other_prev = prevalence_from_json(other.load_records("stats", "prevalence").at(0));
        const auto hash_a = store_.load_records("stats", "annotator").at(0).at("hash").get<std::string>();
        const auto hash_b = other.load_records("stats", "annotator").at(0).at("hash").get<std::string>();
        const auto cross = cross_model_report(store_.run_id(), prevalence, hash_a, other.run_id(), other_prev, hash_b);
        tables.emplace_back("cross_model_" + other.run_id(), cross_model_table(cross));
      }

      if (options_.vignette_conv) {
        const auto& id = *options_.vignette_conv;
        if (!store_.has_artifact("conversations", id)) throw PreconditionError("unknown conversation " + id);
        auto conv = conversation_from_json(store_.load_records("conversations", id).at(0));
        const auto labels = load_consensus(store_);
        for (auto& t : conv.turns) {
          if (auto it = labels.find({conv.conv_id, t.index}); it != labels.end()) t.consensus_labels = it->second;
        }
        std::optional<SingleTurnResult> single;
        if (store_.has_artifact("single_turn", conv.post_id)) {
          single = single_turn_from_json(store_.load_records("single_turn", conv.post_id).at(0));
          const auto single_labels = load_single_consensus(store_);
          if (auto it = single_labels.find(conv.post_id); it != single_labels.end()) single->labels = it->second;
        }
        tables.emplace_back("vignette_" + id, vignette_table(vignette_comparison(conv, single)));
      }

      std::string combined = "# SSBC audit report\n";
      for (const auto& [name, table] : tables) {
        write_table(store_, name, table);
        combined += "\n" + render_markdown(table);
      }
      atomic_write(store_.kind_dir("reports") / "report.md", combined);
      return plural(tables.size(), "table") + " written to " + store_.kind_dir("reports").string();
    }
  }
  return {};
}

StageOutcome Pipeline::select_probes(std::size_t k) {
  if (!store_.stage_version("probe-train")) {
    throw DependencyError("probe select requires 'probe-train', which has not completed for run '" +
                          store_.run_id() + "'");
  }
  log_->set_stage("probe-select");
  const auto hsd = config_.probe.hsd.empty() ? store_.kind_dir("probes") / "train.hsd" : config_.probe.hsd;
  const auto records = read_hsd(hsd);
  ProbeHyperparams hyper;
  hyper.l2 = config_.probe.l2;
  hyper.max_iterations = config_.probe.max_iterations;
  const auto ensemble = build_ensemble(records, load_layer_metrics(store_), k, hyper);
  store_.persist_records("probes", "ensemble", {to_json(ensemble)});
  std::string layers;
  for (const auto& m : ensemble.members) layers += (layers.empty() ? "" : ",") + std::to_string(m.layer);
  log_->emit("ensemble_selected", {{"k", k}, {"layers", layers}});
  // probe-infer hashes the ensemble file, so downstream stages rerun on the next pass
  return {Stage::probe_train, false, "ensemble layers " + layers};
}

StageOutcome Pipeline::agreement(const std::optional<fs::path>& human_labels) {
  const auto version = store_.stage_version("consensus");
  if (!version) {
    throw DependencyError("agreement requires 'consensus', which has not completed for run '" + store_.run_id() +
                          "'");
  }
  if (version->substr(0, version->find('.')) != stage_hash(Stage::consensus)) {
    throw DependencyError("agreement requires 'consensus', which is out of date for run '" + store_.run_id() +
                          "'; rerun consensus first");
  }
  log_->set_stage("agreement");
  const auto temps = annotated_temperatures(store_);
  std::vector<AnnotationRun> runs;
  for (double t : temps) {
    runs.push_back(annotation_run_from_records(store_.load_records("annotations", "run_T" + temp_tag(t)),
                                               store_.load_records("annotations", "raw_T" + temp_tag(t))));
  }
  std::vector<const AnnotationRun*> ptrs;
  for (const auto& r : runs) ptrs.push_back(&r);
  const auto stability = agreement_metrics(ptrs);
  store_.persist_records("stats", "agreement", {to_json(stability, temps)});
  std::string summary = "mean F1 " + format_number(stability.mean_f1) + ", mean Jaccard " +
                        format_number(stability.mean_jaccard) + ", exact three-way " +
                        format_number(stability.exact_threeway_match_rate);
  if (human_labels) {
    const auto human = human_labels_from_records(read_jsonl(*human_labels));
    const auto report = compare_with_rater(load_consensus(store_), human);
    store_.persist_records("stats", "agreement_human", {to_json(report)});
    summary += "; vs human: " + std::to_string(report.items) + " turns, micro-F1 " + format_number(report.micro_f1) +
               ", mean MASI " + format_number(report.mean_masi);
  }
  log_->emit("agreement", {{"summary", summary}});
  return {Stage::consensus, false, summary};
}

}  // namespace ssbc
