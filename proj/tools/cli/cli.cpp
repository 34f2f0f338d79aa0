#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>

#include "ssbc/pipeline.hpp"
#include "ssbc/pipeline_config.hpp"

namespace ssbc::cli {

namespace {

struct Flags {
  std::string config;
  std::string run;
  std::string runs_root;
  std::string endpoint;
  std::string model;
  std::string agent;
  std::string temps;
  std::string hsd;
  std::string human;
  std::string compare;
  std::string vignette;
  std::optional<int> max_retries;
  std::optional<std::size_t> concurrency;
  std::optional<int> max_attempts;
  std::optional<std::size_t> k;
  std::optional<std::uint64_t> seed;
  bool single_turn = false;
  bool force = false;
  bool offline = false;
  bool verbose = false;
};

enum class Command { stage, all, probe_select, agreement };

std::vector<double> parse_temps(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw ConfigError("bad temperature '" + item + "' in --temps");
    out.push_back(v);
  }
  return out;
}

PipelineConfig resolve_config(const Flags& f) {
  PipelineConfig config;
  if (!f.config.empty()) {
    config = load_config(f.config);
  } else {
    const std::filesystem::path root = f.runs_root.empty() ? "runs" : f.runs_root;
    if (f.run.empty() || !RunStore::exists(root, f.run)) {
      throw ConfigError("no --config given and no existing run to take the configuration from");
    }
    config = config_from_json(RunStore::open(root, f.run).manifest().config_snapshot);
  }
  if (!f.run.empty()) config.run_id = f.run;
  if (!f.runs_root.empty()) config.runs_root = f.runs_root;
  if (f.max_retries) config.gateway.max_retries = *f.max_retries;
  if (f.concurrency) config.gateway.concurrency = *f.concurrency;
  if (f.seed) config.seed = *f.seed;
  if (f.offline) config.gateway.offline = true;
  if (f.max_attempts) config.shard_teacher.max_attempts = *f.max_attempts;
  if (!f.agent.empty()) config.agent.endpoint = f.agent;
  if (f.single_turn) config.agent.single_turn = true;
  if (!f.temps.empty()) config.annotator.temperatures = parse_temps(f.temps);
  if (!f.hsd.empty()) config.probe.hsd = f.hsd;
  if (f.k) config.probe.k = *f.k;
  return config;
}

// --endpoint / --model apply to the role the command talks to.
void apply_role_override(PipelineConfig& config, const Flags& f, Command cmd, std::optional<Stage> stage) {
  if (f.endpoint.empty() && f.model.empty()) return;
  auto set = [&](std::string& endpoint, std::string& model) {
    if (!f.endpoint.empty()) endpoint = f.endpoint;
    if (!f.model.empty()) model = f.model;
  };
  if (cmd != Command::stage || !stage) {
    set(config.agent.endpoint, config.agent.model);
    return;
  }
  switch (*stage) {
    case Stage::shard:
      set(config.shard_teacher.endpoint, config.shard_teacher.model);
      break;
    case Stage::annotate:
      set(config.annotator.endpoint, config.annotator.model);
      break;
    case Stage::probe_train:
      set(config.distress_teacher.endpoint, config.distress_teacher.model);
      break;
    case Stage::probe_infer:
      set(config.hidden_states.endpoint, config.hidden_states.model_id);
      break;
    default:
      set(config.agent.endpoint, config.agent.model);
      break;
  }
}

void print_outcome(std::ostream& out, const StageOutcome& o) {
  out << to_string(o.stage) << ": " << o.summary << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
            std::function<std::unique_ptr<HttpTransport>()> transport) {
  CLI::App app{"Batch audit of support behaviour in multi-turn conversations", "ssbc-audit"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Pipeline configuration file (JSON)");
  app.add_option("--run", f.run, "Run id");
  app.add_option("--runs-root", f.runs_root, "Directory holding run directories (default: runs)");
  app.add_option("--endpoint", f.endpoint, "Endpoint alias or URL for the stage's model role");
  app.add_option("--model", f.model, "Model name for the stage's model role");
  app.add_option("--max-retries", f.max_retries, "Retries per request");
  app.add_option("--concurrency", f.concurrency, "Global bound on in-flight requests and workers");
  app.add_option("--seed", f.seed, "Base seed");
  app.add_flag("--force", f.force, "Rerun stages even when their inputs are unchanged");
  app.add_flag("--offline", f.offline, "Serve only from the response cache");
  app.add_flag("-v,--verbose", f.verbose, "Echo event records to stderr");

  std::string stage_name;
  auto* all = app.add_subcommand("all", "Run every stage in order");
  auto* run = app.add_subcommand("run", "Run one stage, or all");
  run->add_option("stage", stage_name, "Stage name or 'all'")->required();

  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (auto s : kStages) {
    if (s == Stage::probe_train || s == Stage::probe_infer) continue;
    auto* sub = app.add_subcommand(std::string(to_string(s)), "Run the " + std::string(to_string(s)) + " stage");
    stage_cmds.emplace_back(sub, s);
  }
  stage_cmds.emplace_back(app.add_subcommand("probe-train", "Train per-layer probes and the ensemble"),
                          Stage::probe_train);
  stage_cmds.emplace_back(app.add_subcommand("probe-infer", "Estimate distress for every turn"), Stage::probe_infer);
  auto* probe = app.add_subcommand("probe", "Probe training, layer selection and inference");
  probe->require_subcommand(1);
  auto* probe_train = probe->add_subcommand("train", "Train per-layer probes and the ensemble");
  auto* probe_select = probe->add_subcommand("select", "Rebuild the ensemble from the top-K layers");
  auto* probe_infer = probe->add_subcommand("infer", "Estimate distress for every turn");
  auto* agreement = app.add_subcommand("agreement", "Annotation stability and agreement with a human rater");

  for (auto* sub : {all, run}) sub->add_option("--compare", f.compare, "Other run for the cross-model table");
  for (auto& [sub, s] : stage_cmds) {
    if (s == Stage::shard) sub->add_option("--max-attempts", f.max_attempts, "Teacher attempts per post");
    if (s == Stage::simulate) {
      sub->add_option("--agent", f.agent, "Agent endpoint alias");
      sub->add_flag("--single-turn", f.single_turn, "Also collect single-turn replies");
    }
    if (s == Stage::annotate) sub->add_option("--temps", f.temps, "Comma-separated annotation temperatures");
    if (s == Stage::probe_train) sub->add_option("--hsd", f.hsd, "Pre-extracted hidden states");
    if (s == Stage::report) {
      sub->add_option("--compare", f.compare, "Other run for the cross-model table");
      sub->add_option("--vignette", f.vignette, "Conversation id for the vignette table");
    }
  }
  probe_train->add_option("--hsd", f.hsd, "Pre-extracted hidden states");
  probe_select->add_option("--k", f.k, "Number of layers in the ensemble")->required();
  agreement->add_option("--human", f.human, "Human label file (JSONL)");
  for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
    for (auto* nested : sub->get_subcommands([](const CLI::App*) { return true; })) nested->fallthrough();
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  Command cmd = Command::stage;
  std::optional<Stage> stage;
  if (all->parsed()) {
    cmd = Command::all;
  } else if (run->parsed()) {
    if (stage_name == "all") {
      cmd = Command::all;
    } else if (auto s = parse_stage(stage_name)) {
      stage = s;
    } else {
      err << "error: unknown stage '" << stage_name << "'\n";
      return 2;
    }
  } else if (probe->parsed()) {
    if (probe_train->parsed()) stage = Stage::probe_train;
    if (probe_infer->parsed()) stage = Stage::probe_infer;
    if (probe_select->parsed()) cmd = Command::probe_select;
  } else if (agreement->parsed()) {
    cmd = Command::agreement;
  } else {
    for (auto& [sub, s] : stage_cmds) {
      if (sub->parsed()) stage = s;
    }
  }

  try {
    auto config = resolve_config(f);
    apply_role_override(config, f, cmd, stage);
    PipelineOptions options;
    options.force = f.force;
    options.echo_log = f.verbose;
    if (!f.compare.empty()) options.compare_run = f.compare;
    if (!f.vignette.empty()) options.vignette_conv = f.vignette;
    options.transport_factory = std::move(transport);
    Pipeline pipeline(std::move(config), std::move(options));

    int status = 0;
    try {
      switch (cmd) {
        case Command::all:
          for (auto s : kStages) print_outcome(out, pipeline.run_stage(s));
          break;
        case Command::stage:
          print_outcome(out, pipeline.run_stage(*stage));
          break;
        case Command::probe_select:
          out << "probe select: " << pipeline.select_probes(*f.k).summary << "\n";
          break;
        case Command::agreement: {
          std::optional<std::filesystem::path> human;
          if (!f.human.empty()) human = f.human;
          out << "agreement: " << pipeline.agreement(human).summary << "\n";
          break;
        }
      }
    } catch (const std::exception& e) {
      err << "error: " << e.what() << "\n";
      status = 1;
    }
    const auto c = pipeline.counters();
    out << "network_calls=" << c.network_calls << " cache_hits=" << c.cache_hits << " retries=" << c.retries << "\n";
    return status;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ssbc::cli
