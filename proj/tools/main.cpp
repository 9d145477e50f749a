// pfuzz: mutation-based jailbreak-template fuzzer for chat models.
// Subcommands: fuzz (live or simulated campaign), simulate (bundled
// simulator), evaluate (fixed template set, no mutation), ablate (upgrade
// matrix on the simulator), dump-spec (export bundled spec and seeds).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pfuzz/ablation.hpp"
#include "pfuzz/engine.hpp"
#include "pfuzz/http_client.hpp"
#include "pfuzz/reporting.hpp"
#include "pfuzz/simulator.hpp"

namespace fs = std::filesystem;
using namespace pfuzz;

namespace {

struct CommonOpts {
  CampaignConfig cfg;
  std::string sim_spec_path;
  std::string seeds_path;
  std::string questions_path;
  std::string out_dir;
  std::string prompts_dir;
  std::string target_endpoint, target_model;
  std::string mutator_endpoint, mutator_model;
  std::string judge_endpoint, judge_model;
  bool redact = false;
  bool quiet = false;
  bool judge_fail_open = false;
};

void add_hyper_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--budget", o.cfg.query_budget,
                  "target-model query budget");
  cmd->add_option("--rng-seed", o.cfg.rng_seed, "campaign RNG seed");
  cmd->add_option("--workers", o.cfg.worker_count,
                  "parallel dispatch width");
  cmd->add_option("--warmup-fraction", o.cfg.warmup_fraction,
                  "fraction of questions used in warmup");
  cmd->add_option("--early-exit-fraction", o.cfg.early_exit.fraction,
                  "early-exit fraction of active questions");
  cmd->add_option("--early-exit-min", o.cfg.early_exit.min_questions,
                  "early-exit threshold floor");
  cmd->add_option("--early-exit-max", o.cfg.early_exit.max_questions,
                  "early-exit threshold cap");
  cmd->add_option_function<std::string>(
         "--early-exit-mode",
         [&o](const std::string& v) {
           o.cfg.early_exit.mode = v == "first-window"
                                       ? EarlyExitConfig::Mode::FirstWindowOnly
                                       : EarlyExitConfig::Mode::ConsecutiveMisses;
         },
         "consecutive (default) or first-window")
      ->check(CLI::IsMember({"consecutive", "first-window"}));
  cmd->add_option("--placeholder", o.cfg.placeholder,
                  "question placeholder token");
  cmd->add_option("--target-temperature", o.cfg.target_temperature,
                  "target sampling temperature");
  cmd->add_option("--target-max-tokens", o.cfg.target_max_tokens,
                  "target response token cap");
  cmd->add_option("--mutator-temperature", o.cfg.mutator_temperature,
                  "mutator sampling temperature");
  cmd->add_option("--mutator-max-tokens", o.cfg.mutator_max_tokens,
                  "mutator response token cap");
  cmd->add_flag_callback(
      "--no-stop-on-all-broken",
      [&o] { o.cfg.stop_on_all_broken = false; },
      "keep fuzzing after every question is jailbroken");

  cmd->add_option("--mutation-alpha", o.cfg.mutation_selector.alpha,
                  "mutation selector learning rate");
  cmd->add_option("--mutation-gamma", o.cfg.mutation_selector.gamma,
                  "mutation selector discount factor");
  cmd->add_option("--mutation-epsilon",
                  o.cfg.mutation_selector.epsilon.initial,
                  "mutation selector initial epsilon");
  cmd->add_option("--mutation-epsilon-decay",
                  o.cfg.mutation_selector.epsilon.decay_factor,
                  "mutation selector epsilon decay factor");
  cmd->add_option("--mutation-epsilon-min",
                  o.cfg.mutation_selector.epsilon.minimum,
                  "mutation selector epsilon floor");
  cmd->add_option("--mutation-delta", o.cfg.mutation_selector.smoothing_delta,
                  "mutation selector smoothing constant");
  cmd->add_option("--template-alpha", o.cfg.template_selector.alpha,
                  "template selector learning rate");
  cmd->add_option("--template-gamma", o.cfg.template_selector.gamma,
                  "template selector discount factor");
  cmd->add_option("--template-epsilon",
                  o.cfg.template_selector.epsilon.initial,
                  "template selector initial epsilon");
  cmd->add_option("--template-epsilon-decay",
                  o.cfg.template_selector.epsilon.decay_factor,
                  "template selector epsilon decay factor");
  cmd->add_option("--template-epsilon-min",
                  o.cfg.template_selector.epsilon.minimum,
                  "template selector epsilon floor");
  cmd->add_option("--template-delta", o.cfg.template_selector.smoothing_delta,
                  "template selector smoothing constant");

  UpgradeFlags& u = o.cfg.upgrades;
  cmd->add_flag_callback("--disable-refusal-suppression",
                         [&u] { u.refusal_suppression = false; },
                         "drop the RefusalSuppression mutation");
  cmd->add_flag_callback("--disable-inject-prefix",
                         [&u] { u.inject_prefix = false; },
                         "drop the InjectPrefix mutation");
  cmd->add_flag_callback("--disable-expand-after",
                         [&u] { u.expand_after = false; },
                         "drop the ExpandAfter mutation");
  cmd->add_flag_callback("--disable-transfer-mutation",
                         [&u] { u.transfer_mutation = false; },
                         "drop the TransferMutation mutation");
  cmd->add_flag_callback("--disable-few-shots",
                         [&u] { u.few_shots = false; },
                         "drop the FewShots mutation");
  cmd->add_flag_callback("--disable-qlearning",
                         [&u] { u.qlearning_mutation_selection = false; },
                         "uniform-random mutation selection");
  cmd->add_flag_callback("--disable-mab",
                         [&u] { u.mab_template_selection = false; },
                         "MCTS-style template selection");
  cmd->add_flag_callback("--disable-early-exit",
                         [&u] { u.early_exit = false; },
                         "evaluate every question each iteration");
  cmd->add_flag_callback("--disable-warmup", [&u] { u.warmup = false; },
                         "skip the warmup stage");
  cmd->add_flag_callback("--disable-pruning",
                         [&u] { u.question_pruning = false; },
                         "keep jailbroken questions in the active set");

  cmd->add_flag("--redact", o.redact,
                "replace response bodies with digests in artifacts");
  cmd->add_flag("--quiet", o.quiet, "suppress per-iteration progress");
  cmd->add_option("--prompts-dir", o.prompts_dir,
                  "directory overriding built-in mutation prompt texts");
}

void add_endpoint_flags(CLI::App* cmd, CommonOpts& o, bool with_mutator) {
  cmd->add_option("--sim-spec", o.sim_spec_path,
                  "simulator spec JSON (replaces live endpoints)");
  cmd->add_option("--target-endpoint", o.target_endpoint,
                  "target chat-completions URL (or PFUZZ_TARGET_ENDPOINT)");
  cmd->add_option("--target-model", o.target_model, "target model id");
  if (with_mutator) {
    cmd->add_option("--mutator-endpoint", o.mutator_endpoint,
                    "mutator chat-completions URL");
    cmd->add_option("--mutator-model", o.mutator_model, "mutator model id");
  }
  cmd->add_option("--judge-endpoint", o.judge_endpoint,
                  "judge chat-completions URL");
  cmd->add_option("--judge-model", o.judge_model, "judge model id");
  cmd->add_flag("--judge-fail-open", o.judge_fail_open,
                "count judge transport failures as jailbreaks");
}

HttpClientConfig role_config(const std::string& role,
                             const std::string& endpoint,
                             const std::string& model) {
  HttpClientConfig cfg = http_config_from_env(role);
  if (!endpoint.empty()) cfg.endpoint = endpoint;
  if (!model.empty()) cfg.model = model;
  if (cfg.endpoint.empty()) {
    throw ValidationError("no endpoint for " + role +
                          " (flag or PFUZZ_" + role + "_ENDPOINT)");
  }
  return cfg;
}

struct BuiltClients {
  std::unique_ptr<ChatClient> target;
  std::unique_ptr<ChatClient> mutator;
  std::unique_ptr<JudgeClient> judge;
  std::optional<SimulatedTargetSpec> spec;  // set in simulator mode
  Clients handles() {
    return Clients{target.get(), mutator.get(), judge.get()};
  }
};

BuiltClients build_clients(const CommonOpts& o, const PromptLibrary& lib,
                           bool need_mutator) {
  BuiltClients out;
  if (!o.sim_spec_path.empty()) {
    out.spec = SimulatedTargetSpec::load_file(o.sim_spec_path);
  }
  if (out.spec) {
    out.target = std::make_unique<SimulatedTarget>(*out.spec);
    out.mutator = std::make_unique<SimulatedMutator>(out.spec->mutator, lib);
    out.judge = std::make_unique<SimulatedJudge>();
    return out;
  }
  out.target = std::make_unique<HttpChatClient>(
      role_config("TARGET", o.target_endpoint, o.target_model));
  if (need_mutator) {
    out.mutator = std::make_unique<HttpChatClient>(
        role_config("MUTATOR", o.mutator_endpoint, o.mutator_model));
  }
  out.judge = std::make_unique<HttpJudgeClient>(
      role_config("JUDGE", o.judge_endpoint, o.judge_model), lib,
      o.judge_fail_open ? Verdict::Jailbreak : Verdict::Refusal);
  return out;
}

// Progress printer plus live attack log.
class CliSink : public EventSink {
 public:
  CliSink(const fs::path& out_dir, bool redact, bool quiet)
      : writer_(out_dir / "attacks.jsonl",
                ReportOptions{redact}),
        quiet_(quiet) {}

  void on_attack(const AttackRecord& rec) override { writer_.on_attack(rec); }

  void on_iteration(const IterationEvent& ev) override {
    if (quiet_) return;
    if (ev.warmup) {
      std::cerr << "[warmup] seed " << ev.selected_template << " dispatched "
                << ev.dispatched << " jailbreaks " << ev.jailbreaks
                << (ev.fruitless ? " (fruitless)" : "") << " total "
                << ev.total_queries << "\n";
      return;
    }
    std::cerr << "[iter " << ev.iteration << "] template "
              << ev.selected_template << " mutation "
              << (ev.mutation ? to_string(*ev.mutation) : "-");
    if (!ev.mutant_valid) {
      std::cerr << " invalid-mutant";
    } else {
      std::cerr << " dispatched " << ev.dispatched << " jailbreaks "
                << ev.jailbreaks << (ev.fruitless ? " (fruitless)" : "")
                << (ev.accepted ? " accepted" : " discarded");
    }
    std::cerr << " total " << ev.total_queries << "\n";
  }

 private:
  AttackLogWriter writer_;
  bool quiet_;
};

void print_summary(const CampaignResult& result) {
  const CampaignMetrics& m = result.metrics;
  std::cout << "questions jailbroken: " << m.jailbroken_question_count << "/"
            << result.state.questions.size() << " (ASR " << m.asr_percent
            << "%)\n";
  std::cout << "total target queries: " << m.total_queries << "\n";
  if (m.avg_queries_per_jailbreak) {
    std::cout << "avg queries per jailbreak: " << *m.avg_queries_per_jailbreak
              << "\n";
  } else {
    std::cout << "avg queries per jailbreak: n/a\n";
  }
  std::cout << "jailbreaking templates: " << m.jailbreaking_template_count
            << "\n";
  std::cout << "fuzzing iterations: " << result.state.iteration << "\n";

  std::vector<Template> population;
  for (int id : result.state.population) {
    population.push_back(result.state.tpl(id));
  }
  auto ranked = rank_templates(population);
  std::cout << "top templates:\n";
  for (std::size_t i = 0; i < std::min<std::size_t>(5, ranked.size()); ++i) {
    const Template& t = ranked[i];
    std::cout << "  #" << i + 1 << " id " << t.id << " jailbreaks "
              << t.jailbreaks << " attempts " << t.attempts << " mutation "
              << (t.mutation_applied ? to_string(*t.mutation_applied) : "seed")
              << "\n";
  }
}

PromptLibrary load_prompts(const CommonOpts& o) {
  if (o.prompts_dir.empty()) return PromptLibrary::builtin();
  return PromptLibrary::from_directory(o.prompts_dir);
}

int run_fuzz_like(CommonOpts& o, bool bundled_simulator) {
  PromptLibrary lib = load_prompts(o);
  if (bundled_simulator && o.sim_spec_path.empty()) {
    // `simulate` uses the bundled spec unless one is supplied
  }
  std::optional<SimulatedTargetSpec> spec;
  if (!o.sim_spec_path.empty()) {
    spec = SimulatedTargetSpec::load_file(o.sim_spec_path);
  } else if (bundled_simulator) {
    spec = canonical_spec();
  }

  std::vector<std::string> seeds;
  if (!o.seeds_path.empty()) {
    seeds = load_text_records(o.seeds_path);
  } else if (spec) {
    seeds = canonical_seed_texts();
  } else {
    throw ValidationError("--seeds is required for live campaigns");
  }

  std::vector<std::string> questions;
  if (spec) {
    if (!o.questions_path.empty()) {
      throw ValidationError(
          "simulator campaigns take their questions from the spec; drop "
          "--questions");
    }
    questions = spec->question_texts();
  } else {
    if (o.questions_path.empty()) {
      throw ValidationError("--questions is required for live campaigns");
    }
    questions = load_text_records(o.questions_path);
  }

  BuiltClients clients;
  if (spec) {
    clients.target = std::make_unique<SimulatedTarget>(*spec);
    clients.mutator = std::make_unique<SimulatedMutator>(spec->mutator, lib);
    clients.judge = std::make_unique<SimulatedJudge>();
  } else {
    clients = build_clients(o, lib, /*need_mutator=*/true);
  }

  fs::create_directories(o.out_dir);
  CliSink sink(o.out_dir, o.redact, o.quiet);
  Clients handles = clients.handles();
  CampaignResult result =
      run_campaign(seeds, questions, o.cfg, handles, lib, &sink);

  CampaignReport report = build_report(result.state, result.metrics);
  persist_report(report, o.cfg, o.out_dir, ReportOptions{o.redact});
  print_summary(result);
  std::cout << "artifacts written to " << o.out_dir << "\n";
  return 0;
}

int run_evaluate_cmd(CommonOpts& o, const std::string& templates_path,
                     int top_k) {
  PromptLibrary lib = load_prompts(o);
  std::vector<Template> templates = load_template_set(templates_path);

  std::optional<SimulatedTargetSpec> spec;
  if (!o.sim_spec_path.empty()) {
    spec = SimulatedTargetSpec::load_file(o.sim_spec_path);
  }
  std::vector<std::string> questions;
  if (spec) {
    questions = spec->question_texts();
  } else if (!o.questions_path.empty()) {
    questions = load_text_records(o.questions_path);
  } else {
    throw ValidationError("evaluate needs --questions or --sim-spec");
  }

  std::unique_ptr<ChatClient> target;
  std::unique_ptr<JudgeClient> judge;
  if (spec) {
    target = std::make_unique<SimulatedTarget>(*spec);
    judge = std::make_unique<SimulatedJudge>();
  } else {
    target = std::make_unique<HttpChatClient>(
        role_config("TARGET", o.target_endpoint, o.target_model));
    judge = std::make_unique<HttpJudgeClient>(
        role_config("JUDGE", o.judge_endpoint, o.judge_model), lib,
        o.judge_fail_open ? Verdict::Jailbreak : Verdict::Refusal);
  }

  fs::create_directories(o.out_dir);
  AttackLogWriter writer(fs::path(o.out_dir) / "attacks.jsonl",
                         ReportOptions{o.redact});
  EvaluateResult eval = run_evaluate(std::move(templates), questions, *target,
                                     *judge, o.cfg.placeholder, &writer);

  nlohmann::json summary;
  summary["format_version"] = 1;
  summary["questions"] = questions.size();
  summary["templates"] = eval.ranked.size();
  summary["total_queries"] = eval.metrics.total_queries;
  summary["asr_percent"] = eval.metrics.asr_percent;
  summary["top_k_template_asr"] = nlohmann::json::object();
  for (int k = 1; k <= top_k; ++k) {
    summary["top_k_template_asr"][std::to_string(k)] = eval.top_k_asr(k);
  }
  std::ofstream out(fs::path(o.out_dir) / "evaluate_summary.json");
  out << summary.dump(2) << "\n";

  std::cout << "ASR " << eval.metrics.asr_percent << "% over "
            << questions.size() << " questions, " << eval.metrics.total_queries
            << " queries\n";
  std::cout << "Top-1 Template ASR " << eval.top_k_asr(1) << "%\n";
  if (top_k >= 5) {
    std::cout << "Top-5 Template ASR " << eval.top_k_asr(5) << "%\n";
  }
  return 0;
}

int run_ablate_cmd(CommonOpts& o, const std::string& configs_csv,
                   const std::string& seed_list) {
  SimulatedTargetSpec spec = o.sim_spec_path.empty()
                                 ? canonical_spec()
                                 : SimulatedTargetSpec::load_file(o.sim_spec_path);
  std::vector<std::string> seeds = o.seeds_path.empty()
                                       ? canonical_seed_texts()
                                       : load_text_records(o.seeds_path);

  std::vector<std::string> names;
  if (configs_csv.empty() || configs_csv == "all") {
    names = ablation_config_names();
  } else {
    std::string item;
    std::istringstream in(configs_csv);
    while (std::getline(in, item, ',')) names.push_back(item);
  }

  std::vector<std::uint64_t> rng_seeds;
  {
    // "a..b" range or comma-separated list
    auto dots = seed_list.find("..");
    if (dots != std::string::npos) {
      std::uint64_t lo = std::stoull(seed_list.substr(0, dots));
      std::uint64_t hi = std::stoull(seed_list.substr(dots + 2));
      for (std::uint64_t s = lo; s <= hi; ++s) rng_seeds.push_back(s);
    } else {
      std::string item;
      std::istringstream in(seed_list);
      while (std::getline(in, item, ',')) rng_seeds.push_back(std::stoull(item));
    }
  }

  AblationMatrixResult result =
      run_ablation_matrix(spec, seeds, o.cfg, rng_seeds, names);
  std::string table = format_ablation_table(result);
  std::cout << table;

  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    std::ofstream table_out(fs::path(o.out_dir) / "ablation.txt");
    table_out << table;
    nlohmann::json j;
    j["format_version"] = 1;
    j["rows"] = nlohmann::json::array();
    for (const AblationRow& row : result.rows) {
      nlohmann::json r;
      r["name"] = row.name;
      r["median_asr"] = row.median_asr;
      if (row.median_queries_per_jailbreak) {
        r["median_queries_per_jailbreak"] = *row.median_queries_per_jailbreak;
      }
      r["runs"] = nlohmann::json::array();
      for (const AblationRunStats& s : row.runs) {
        r["runs"].push_back({{"rng_seed", s.rng_seed},
                             {"asr_percent", s.asr_percent},
                             {"jailbreaks", s.jailbreaks},
                             {"total_queries", s.total_queries},
                             {"jailbreaking_templates",
                              s.jailbreaking_templates}});
      }
      j["rows"].push_back(std::move(r));
    }
    std::ofstream json_out(fs::path(o.out_dir) / "ablation.json");
    json_out << j.dump(2) << "\n";
    std::cout << "ablation artifacts written to " << o.out_dir << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mutation-based jailbreak-template fuzzer"};
  app.require_subcommand(1);

  CommonOpts fuzz_opts;
  CLI::App* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
  fuzz->add_option("--seeds", fuzz_opts.seeds_path, "seed template file");
  fuzz->add_option("--questions", fuzz_opts.questions_path, "question file");
  fuzz->add_option("--out", fuzz_opts.out_dir, "artifact directory")
      ->required();
  add_endpoint_flags(fuzz, fuzz_opts, true);
  add_hyper_flags(fuzz, fuzz_opts);

  CommonOpts sim_opts;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "fuzz the bundled deterministic simulator");
  simulate->add_option("--seeds", sim_opts.seeds_path,
                       "seed template file (default: bundled seeds)");
  simulate->add_option("--sim-spec", sim_opts.sim_spec_path,
                       "simulator spec JSON (default: bundled spec)");
  simulate->add_option("--out", sim_opts.out_dir, "artifact directory")
      ->required();
  add_hyper_flags(simulate, sim_opts);

  CommonOpts eval_opts;
  std::string templates_path;
  int top_k = 5;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "apply a fixed template set to questions without fuzzing");
  evaluate->add_option("--templates", templates_path, "templates.jsonl file")
      ->required();
  evaluate->add_option("--questions", eval_opts.questions_path,
                       "question file");
  evaluate->add_option("--out", eval_opts.out_dir, "artifact directory")
      ->required();
  evaluate->add_option("--top-k", top_k, "report Top-1..k template ASR");
  add_endpoint_flags(evaluate, eval_opts, false);
  evaluate->add_flag("--redact", eval_opts.redact,
                     "replace response bodies with digests");
  evaluate->add_option("--placeholder", eval_opts.cfg.placeholder,
                       "question placeholder token");
  evaluate->add_option("--prompts-dir", eval_opts.prompts_dir,
                       "prompt text override directory");

  CommonOpts ablate_opts;
  ablate_opts.cfg.query_budget = 1000;
  std::string configs_csv = "all";
  std::string seed_list = "1..10";
  CLI::App* ablate = app.add_subcommand(
      "ablate", "run the upgrade ablation matrix on the simulator");
  ablate->add_option("--sim-spec", ablate_opts.sim_spec_path,
                     "simulator spec JSON (default: bundled spec)");
  ablate->add_option("--seeds", ablate_opts.seeds_path,
                     "seed template file (default: bundled seeds)");
  ablate->add_option("--out", ablate_opts.out_dir, "artifact directory");
  ablate->add_option("--configs", configs_csv,
                     "comma-separated config names or 'all'");
  ablate->add_option("--seed-list", seed_list,
                     "rng seeds, e.g. 1..10 or 3,5,8");
  add_hyper_flags(ablate, ablate_opts);

  std::string dump_spec_path = "canonical_spec.json";
  std::string dump_seeds_path = "simulator_seeds.jsonl";
  CLI::App* dump = app.add_subcommand(
      "dump-spec", "write the bundled simulator spec and seeds to files");
  dump->add_option("--spec", dump_spec_path, "output spec path");
  dump->add_option("--seeds", dump_seeds_path, "output seeds path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fuzz->parsed()) return run_fuzz_like(fuzz_opts, false);
    if (simulate->parsed()) return run_fuzz_like(sim_opts, true);
    if (evaluate->parsed()) {
      return run_evaluate_cmd(eval_opts, templates_path, top_k);
    }
    if (ablate->parsed()) {
      return run_ablate_cmd(ablate_opts, configs_csv, seed_list);
    }
    if (dump->parsed()) {
      canonical_spec().save_file(dump_spec_path);
      std::ofstream seeds_out(dump_seeds_path);
      nlohmann::json line;
      for (const std::string& seed : canonical_seed_texts()) {
        line = {{"text", seed}};
        seeds_out << line.dump() << "\n";
      }
      std::cout << "wrote " << dump_spec_path << " and " << dump_seeds_path
                << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
