// Acceptance suite: one pass/fail line per criterion, every tolerance pinned
// in code. Criterion 7 drives the CLI binary whose path arrives as argv[1].

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pfuzz/ablation.hpp"
#include "pfuzz/engine.hpp"
#include "pfuzz/mutations.hpp"
#include "pfuzz/reporting.hpp"
#include "pfuzz/rng.hpp"
#include "pfuzz/selection.hpp"
#include "pfuzz/simulator.hpp"

using namespace pfuzz;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;

struct CheckFailure {
  std::string message;
};

void require(bool condition, const std::string& message) {
  if (!condition) throw CheckFailure{message};
}

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// --- shared helpers -------------------------------------------------------

class RefuseAllTarget : public ChatClient {
 public:
  ChatResponse chat(const ChatRequest&) override {
    return {kRefusalText, "stop", 0.0};
  }
};

std::vector<std::string> numbered_questions(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    out.push_back("synthetic question " + std::string(buf));
  }
  return out;
}

std::string random_template_text(Rng& rng) {
  static const char* words[] = {"stay",  "in",    "role",  "the",   "answer",
                                "drill", "scene", "fully", "story", "calmly"};
  std::string text;
  int n = 1 + static_cast<int>(rng.uniform_index(30));
  for (int i = 0; i < n; ++i) {
    text += words[rng.uniform_index(10)];
    text += rng.next_double() < 0.15 ? "\n" : " ";
  }
  text += kDefaultPlaceholder;
  int m = static_cast<int>(rng.uniform_index(20));
  for (int i = 0; i < m; ++i) {
    text += " ";
    text += words[rng.uniform_index(10)];
  }
  return text;
}

struct EventCollector : EventSink {
  std::vector<IterationEvent> events;
  void on_iteration(const IterationEvent& ev) override {
    events.push_back(ev);
  }
};

// --- criterion 1 ----------------------------------------------------------

void criterion_q_update_exactness() {
  Rng rng(0xC1);
  for (int trial = 0; trial < 1000; ++trial) {
    SelectorParams params;
    params.alpha = 0.01 + 0.99 * rng.next_double();
    params.gamma = 0.99 * rng.next_double();

    // mutation table: drive to a random state through the public API, then
    // check one more update against the one-line oracle
    MutationQTable qt(params);
    int root = static_cast<int>(rng.uniform_index(4));
    Template st;
    st.id = root;
    st.root = root;
    int warm = static_cast<int>(rng.uniform_index(12));
    for (int i = 0; i < warm; ++i) {
      Template s;
      s.id = static_cast<int>(rng.uniform_index(4));
      s.root = s.id;
      qt.reward(s, all_mutation_kinds()[rng.uniform_index(kMutationKindCount)],
                rng.next_double());
    }
    MutationKind m =
        all_mutation_kinds()[rng.uniform_index(kMutationKindCount)];
    double r = rng.next_double();
    double old_value = qt.value(root, m);
    double pre_max = 0.0;
    for (MutationKind a : all_mutation_kinds()) {
      pre_max = std::max(pre_max, qt.value(root, a));
    }
    double expected =
        (1.0 - params.alpha) * old_value +
        params.alpha * (r + params.gamma * pre_max);  // Q-learning one-liner
    qt.reward(st, m, r);
    require(std::abs(qt.value(root, m) - expected) < 1e-12,
            "mutation update off by " +
                fmt(std::abs(qt.value(root, m) - expected)));

    // template table, same drill with the flat-table oracle
    TemplateQTable tt(params);
    for (int i = 0; i < 5; ++i) tt.ensure_entry(i);
    for (int i = 0; i < warm; ++i) {
      tt.reward(static_cast<int>(rng.uniform_index(5)), rng.next_double());
    }
    int arm = static_cast<int>(rng.uniform_index(5));
    double r2 = rng.next_double();
    double old2 = tt.value(arm);
    double max2 = 0.0;
    for (const auto& [id, v] : tt.entries()) max2 = std::max(max2, v);
    double expected2 = (1.0 - params.alpha) * old2 +
                       params.alpha * (r2 + params.gamma * max2);
    tt.reward(arm, r2);
    require(std::abs(tt.value(arm) - expected2) < 1e-12,
            "template update off by " +
                fmt(std::abs(tt.value(arm) - expected2)));
  }
}

// --- criterion 2 ----------------------------------------------------------

void criterion_epsilon_greedy_statistics() {
  {
    SelectorParams params;
    params.epsilon.current = 1.0;
    MutationQTable qt(params);
    Template s;
    s.id = 0;
    s.root = 0;
    std::vector<MutationKind> options = {
        MutationKind::Generate, MutationKind::Expand, MutationKind::Shorten,
        MutationKind::Rephrase};
    Rng rng(0xC2);
    std::vector<int> counts(4, 0);
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      MutationKind pick = qt.select(s, options, rng);
      for (std::size_t j = 0; j < options.size(); ++j) {
        if (options[j] == pick) counts[j]++;
      }
    }
    double expected = draws / 4.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // chi-square critical value, dof=3, p=0.01
    require(chi2 < 11.345, "epsilon=1 not uniform: chi2 = " + fmt(chi2));
  }
  {
    SelectorParams params;
    params.epsilon.current = 0.0;
    params.smoothing_delta = 0.1;
    params.alpha = 1.0;
    params.gamma = 0.0;
    MutationQTable qt(params);
    Template s;
    s.id = 0;
    s.root = 0;
    qt.reward(s, MutationKind::Expand, 1.0);  // weights {0, 1}
    std::vector<MutationKind> options = {MutationKind::Generate,
                                         MutationKind::Expand};
    Rng rng(0xC2C2);
    int best = 0;
    const int draws = 10000;
    for (int i = 0; i < draws; ++i) {
      if (qt.select(s, options, rng) == MutationKind::Expand) ++best;
    }
    double p = static_cast<double>(best) / draws;
    require(std::abs(p - 11.0 / 12.0) <= 0.02,
            "P(best) = " + fmt(p) + ", expected 11/12 +- 0.02");
  }
}

// --- criterion 3 ----------------------------------------------------------

void criterion_early_exit_bounds() {
  struct Case {
    int questions;
    int expected_threshold;
    int budget;
  };
  for (Case c : {Case{30, 4, 134}, Case{200, 20, 150}, Case{500, 20, 210}}) {
    CampaignConfig cfg;
    cfg.query_budget = c.budget;
    cfg.rng_seed = 7;
    cfg.worker_count = 3;
    require(early_exit_threshold(c.questions, cfg.early_exit) ==
                c.expected_threshold,
            "threshold(" + std::to_string(c.questions) + ") != " +
                std::to_string(c.expected_threshold));

    std::vector<std::string> seeds = {
        "seed one [INSERT PROMPT HERE]", "seed two [INSERT PROMPT HERE] x"};
    RefuseAllTarget target;
    SimulatedJudge judge;
    SimMutatorParams mparams;
    mparams.invalid_rate = 0.0;
    mparams.phrases = {"Phrase alpha.", "Phrase beta."};
    SimulatedMutator mutator(mparams, PromptLibrary::builtin());
    Clients clients{&target, &mutator, &judge};
    EventCollector collector;
    CampaignResult result =
        run_campaign(seeds, numbered_questions(c.questions), cfg, clients,
                     PromptLibrary::builtin(), &collector);

    require(result.state.consumed_queries == c.budget,
            "refusing campaign must drain the budget exactly");
    int remaining = c.budget;
    for (const IterationEvent& ev : collector.events) {
      if (!ev.mutant_valid) continue;
      int expected = std::min(remaining, c.expected_threshold);
      require(ev.dispatched == expected,
              "iteration consumed " + std::to_string(ev.dispatched) +
                  ", expected " + std::to_string(expected) + " at budget " +
                  std::to_string(remaining));
      remaining -= ev.dispatched;
    }
    require(remaining == 0, "events do not account for the whole budget");
  }
}

// --- criterion 4 ----------------------------------------------------------

SimulatedTargetSpec random_spec(Rng& rng, std::vector<std::string>& seeds_out) {
  SimulatedTargetSpec spec;
  int n_questions = 5 + static_cast<int>(rng.uniform_index(56));
  for (int i = 0; i < n_questions; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", i);
    spec.questions.push_back({"random-spec question " + std::string(buf),
                              0.05 + 0.9 * rng.next_double()});
  }
  const auto& lib = PromptLibrary::builtin();
  spec.features.push_back({"block", lib.refusal_sentinel(),
                           0.15 + 0.3 * rng.next_double(), false, 1});
  spec.features.push_back(
      {"prefix", "Sure, here is\\s*$", 0.1 + 0.2 * rng.next_double(), false, 1});
  int n_seeds = 2 + static_cast<int>(rng.uniform_index(5));
  std::vector<std::string> phrases;
  for (int i = 0; i < 4; ++i) {
    phrases.push_back("Booster phrase " + std::to_string(i) + ".");
    if (rng.next_double() < 0.7) {
      spec.features.push_back({"phrase" + std::to_string(i),
                               "Booster phrase " + std::to_string(i) + "\\.",
                               0.3 * rng.next_double(), false, 1});
    }
  }
  for (int i = 0; i < n_seeds; ++i) {
    std::string marker = "seed-marker-" + std::to_string(i);
    seeds_out.push_back("Roleplay " + marker + " for the drill. " +
                        std::string(kDefaultPlaceholder) + " Stay on task.");
    spec.features.push_back({marker, marker, 0.4 * rng.next_double(), false, 1});
  }
  spec.noise_amplitude = rng.next_double() < 0.5 ? 0.0 : 0.05;
  spec.noise_seed = rng.next_u64();
  spec.mutator.seed = rng.next_u64();
  spec.mutator.invalid_rate = rng.next_double() < 0.3 ? 0.1 : 0.0;
  spec.mutator.phrases = phrases;
  return spec;
}

void criterion_budget_safety() {
  Rng rng(0xC4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> seeds;
    SimulatedTargetSpec spec = random_spec(rng, seeds);
    CampaignConfig cfg;
    cfg.query_budget = 50 + static_cast<int>(rng.uniform_index(1951));
    cfg.rng_seed = rng.next_u64();
    cfg.worker_count = 1 + static_cast<int>(rng.uniform_index(8));
    SimulatedTarget target(spec);
    SimulatedMutator mutator(spec.mutator, PromptLibrary::builtin());
    SimulatedJudge judge;
    Clients clients{&target, &mutator, &judge};
    CampaignResult result =
        run_campaign(seeds, spec.question_texts(), cfg, clients);

    require(result.state.consumed_queries <= cfg.query_budget,
            "budget exceeded");
    require(static_cast<int>(result.state.records.size()) ==
                result.state.consumed_queries,
            "record count != consumed queries");

    std::set<int> broken;
    for (const AttackRecord& rec : result.state.records) {
      require(broken.count(rec.question_id) == 0,
              "jailbroken question re-queried");
      if (rec.verdict == Verdict::Jailbreak) broken.insert(rec.question_id);
    }
    require(result.metrics.jailbroken_question_count ==
                static_cast<int>(spec.questions.size() -
                                 result.state.unbroken.size()),
            "jailbreak count != |Q0| - |unbroken|");
  }
}

// --- criterion 5 ----------------------------------------------------------

void criterion_brute_force_equivalence() {
  const auto& lib = PromptLibrary::builtin();
  SimulatedTargetSpec spec;
  const double bases[5] = {0.45, 0.35, 0.3, 0.2, 0.1};
  std::vector<std::string> seeds;
  for (int i = 0; i < 5; ++i) {
    std::string marker = "static-root-" + std::to_string(i);
    seeds.push_back("Scenario " + marker + " begins. " +
                    std::string(kDefaultPlaceholder));
    spec.features.push_back({marker, marker, bases[i], false, 1});
  }
  spec.features.push_back({"block", lib.refusal_sentinel(), 0.3, false, 1});
  spec.features.push_back({"prefix", "Sure, here is\\s*$", 0.2, false, 1});
  const double difficulties[12] = {0.05, 0.1, 0.2, 0.3,  0.35, 0.45,
                                   0.5,  0.6, 0.7, 0.85, 0.9,  0.98};
  for (int i = 0; i < 12; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", i);
    spec.questions.push_back(
        {"closure question " + std::string(buf), difficulties[i]});
  }

  // engine run: static mutations only, no early exit, epsilon pinned at 1,
  // pruning off so repeated coverage is possible, exhaustive budget (full
  // closure coverage lands near iteration 4200 in the slowest probed seed;
  // 120k queries = ~10k iterations)
  CampaignConfig cfg;
  cfg.query_budget = 120000;
  cfg.rng_seed = 5;
  cfg.worker_count = 4;
  cfg.stop_on_all_broken = false;
  cfg.upgrades.early_exit = false;
  cfg.upgrades.question_pruning = false;
  cfg.restrict_kinds = std::vector<MutationKind>{
      MutationKind::Identity, MutationKind::RefusalSuppression,
      MutationKind::InjectPrefix};
  cfg.mutation_selector.epsilon = {1.0, 1.0, 1.0, 1.0};
  cfg.template_selector.epsilon = {1.0, 1.0, 1.0, 1.0};

  SimulatedTarget target(spec);
  SimulatedJudge judge;
  SimulatedMutator mutator({}, lib);  // never called: static mutations only
  Clients clients{&target, &mutator, &judge};
  CampaignResult result =
      run_campaign(seeds, spec.question_texts(), cfg, clients);

  std::set<std::pair<std::string, int>> engine_pairs;
  for (const AttackRecord& rec : result.state.records) {
    if (rec.verdict == Verdict::Jailbreak) {
      engine_pairs.insert(
          {result.state.tpl(rec.template_id).text, rec.question_id});
    }
  }

  // independent enumeration: breadth-first closure over the two static
  // rewrites with the acceptance rule (only templates that break at least
  // one question may be mutated further)
  auto breaks_of = [&](const std::string& text) {
    std::set<int> out;
    double p = potency(text, spec);
    for (std::size_t q = 0; q < spec.questions.size(); ++q) {
      if (p >= spec.questions[q].difficulty) out.insert(static_cast<int>(q));
    }
    return out;
  };
  std::set<std::pair<std::string, int>> oracle_pairs;
  std::set<std::string> visited;
  std::vector<std::string> frontier = seeds;
  while (!frontier.empty()) {
    std::string text = frontier.back();
    frontier.pop_back();
    if (!visited.insert(text).second) continue;
    std::set<int> broke = breaks_of(text);
    for (int q : broke) oracle_pairs.insert({text, q});
    bool is_seed = std::find(seeds.begin(), seeds.end(), text) != seeds.end();
    if (!is_seed && broke.empty()) continue;  // discarded, never a parent
    const bool has_block =
        text.find(lib.refusal_sentinel()) != std::string::npos;
    const bool has_prefix =
        ends_with_ignoring_trailing_space(text, lib.inject_prefix());
    if (!has_block) {
      frontier.push_back(
          fill_named_placeholders(lib.refusal_block(), {{"TEMPLATE", text}}));
    }
    if (!has_prefix) {
      frontier.push_back(text + "\n" + lib.inject_prefix());
    }
  }

  require(engine_pairs == oracle_pairs,
          "engine found " + std::to_string(engine_pairs.size()) +
              " (text, question) jailbreak pairs, enumeration found " +
              std::to_string(oracle_pairs.size()));
}

// --- criterion 6 ----------------------------------------------------------

void criterion_ablation_ordering() {
  SimulatedTargetSpec spec = canonical_spec();
  CampaignConfig base;
  base.query_budget = 1000;
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 1; s <= 10; ++s) seeds.push_back(s);
  AblationMatrixResult matrix =
      run_ablation_matrix(spec, canonical_seed_texts(), base, seeds,
                          {"G0", "G1.f", "G2.c", "G3.c", "G4", "G3.a"});
  std::map<std::string, const AblationRow*> rows;
  for (const AblationRow& row : matrix.rows) rows[row.name] = &row;

  double g0 = rows["G0"]->median_asr;
  double g4 = rows["G4"]->median_asr;
  for (const char* name : {"G1.f", "G2.c", "G3.c"}) {
    double mid = rows[name]->median_asr;
    require(g0 >= mid, std::string("median ASR: G0 < ") + name + " (" +
                           fmt(g0) + " vs " + fmt(mid) + ")");
    require(mid >= g4, std::string("median ASR: ") + name + " < G4 (" +
                           fmt(mid) + " vs " + fmt(g4) + ")");
  }

  auto qpj = [&](const char* name) {
    require(rows[name]->median_queries_per_jailbreak.has_value(),
            std::string(name) + " broke nothing in any run");
    return *rows[name]->median_queries_per_jailbreak;
  };
  double g0_qpj = qpj("G0");
  double g4_qpj = qpj("G4");
  for (const char* name : {"G1.f", "G2.c", "G3.c"}) {
    double mid = qpj(name);
    require(g0_qpj <= mid, std::string("median Q/J: G0 > ") + name);
    require(mid <= g4_qpj, std::string("median Q/J: ") + name + " > G4");
  }

  // no-early-exit needs at least twice the queries of the full engine to
  // reach the same jailbreak count (median over seeds where both broke
  // something)
  std::vector<double> ratios;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const AblationRunStats& a = rows["G0"]->runs[i];
    const AblationRunStats& b = rows["G3.a"]->runs[i];
    int j = std::min(a.jailbreaks, b.jailbreaks);
    if (j < 1) continue;
    ratios.push_back(static_cast<double>(b.queries_at_jailbreak[j - 1]) /
                     a.queries_at_jailbreak[j - 1]);
  }
  require(!ratios.empty(), "no seed had jailbreaks in both G0 and G3.a");
  double ratio = median(ratios);
  require(ratio >= 2.0,
          "median queries ratio G3.a/G0 = " + fmt(ratio) + ", expected >= 2");
}

// --- criterion 7 ----------------------------------------------------------

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  require(in.good(), "cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void criterion_determinism() {
  require(!g_cli_path.empty(), "CLI path not supplied as argv[1]");
  fs::path base = fs::temp_directory_path() / "pfuzz_acceptance_determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  for (const char* run : {"a", "b"}) {
    std::string cmd = g_cli_path + " simulate --budget 400 --rng-seed 11 --out " +
                      (base / run).string() + " --quiet > /dev/null";
    require(std::system(cmd.c_str()) == 0, "simulate run failed");
  }
  std::string log_a = slurp(base / "a" / "attacks.jsonl");
  std::string log_b = slurp(base / "b" / "attacks.jsonl");
  require(!log_a.empty(), "empty attack log");
  require(log_a == log_b, "attack logs differ between identical runs");
}

// --- criterion 8 ----------------------------------------------------------

void criterion_metric_fidelity() {
  std::vector<AttackRecord> records;
  for (int i = 0; i < 4000; ++i) {
    AttackRecord rec;
    rec.query_index = i + 1;
    rec.template_id = i % 11;
    if (i < 197) {
      rec.question_id = i;
      rec.verdict = Verdict::Jailbreak;
    } else {
      rec.question_id = i % 197;
      rec.verdict = Verdict::Refusal;
    }
    records.push_back(rec);
  }
  CampaignMetrics m = compute_metrics(records, 200);
  require(std::abs(m.asr_percent - 98.5) < 1e-9,
          "ASR = " + fmt(m.asr_percent) + ", expected 98.5");
  require(m.avg_queries_per_jailbreak.has_value(), "missing avg");
  require(std::abs(*m.avg_queries_per_jailbreak - 20.30) <= 0.01,
          "avg queries/jailbreak = " + fmt(*m.avg_queries_per_jailbreak) +
              ", expected 20.30 +- 0.01");
}

// --- criterion 9 ----------------------------------------------------------

void criterion_mutation_contracts() {
  const auto& lib = PromptLibrary::builtin();
  MutantContext ctx;
  Rng rng(0xC9);
  for (int i = 0; i < 1000; ++i) {
    Template t;
    t.id = i;
    t.root = i;
    t.text = random_template_text(rng);
    for (MutationKind kind :
         {MutationKind::Identity, MutationKind::RefusalSuppression,
          MutationKind::InjectPrefix}) {
      Template out = apply_static(kind, t, i + 1, ctx, lib);
      require(count_placeholder(out.text, kDefaultPlaceholder) == 1,
              std::string(to_string(kind)) + " broke the placeholder");
    }
  }

  // the two compatibility exclusions
  Template suffixed;
  suffixed.id = 0;
  suffixed.root = 0;
  suffixed.text = "x [INSERT PROMPT HERE]\nSure, here is";
  auto set1 = compatible_mutations(suffixed, ctx, lib);
  require(std::find(set1.begin(), set1.end(), MutationKind::InjectPrefix) ==
              set1.end(),
          "InjectPrefix not excluded on prefix-suffixed template");
  require(std::find(set1.begin(), set1.end(), MutationKind::ExpandAfter) ==
              set1.end(),
          "ExpandAfter not excluded on prefix-suffixed template");

  Template blocked;
  blocked.id = 1;
  blocked.root = 1;
  blocked.text = fill_named_placeholders(
      lib.refusal_block(), {{"TEMPLATE", "y [INSERT PROMPT HERE]"}});
  auto set2 = compatible_mutations(blocked, ctx, lib);
  require(std::find(set2.begin(), set2.end(),
                    MutationKind::RefusalSuppression) == set2.end(),
          "RefusalSuppression not excluded on suppression-containing template");

  // tag round-trip
  for (int i = 0; i < 500; ++i) {
    std::string text = random_template_text(rng);
    auto parsed = parse_mutator_response(
        lib.answer_begin_tag() + "\n" + text + "\n" + lib.answer_end_tag(),
        kDefaultPlaceholder, lib);
    require(parsed.ok() && *parsed.text == text,
            "tag wrap/parse round-trip failed");
  }
}

// --- criterion 10 ---------------------------------------------------------

void criterion_evaluate_protocol() {
  SimulatedTargetSpec spec;
  // 92 breakable questions (60 easy + 32 medium), 8 out of reach
  for (int i = 0; i < 100; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d", i);
    double d;
    if (i < 60) {
      d = 0.05 + 0.5 * i / 59.0;  // up to 0.55
    } else if (i < 92) {
      d = 0.65 + 0.2 * (i - 60) / 31.0;  // 0.65 .. 0.85
    } else {
      d = 0.95;
    }
    spec.questions.push_back({"protocol question " + std::string(buf), d});
  }
  spec.features.push_back({"r0", "rank-zero-marker", 0.6, false, 1});
  spec.features.push_back({"r1", "rank-one-marker", 0.9, false, 1});
  spec.features.push_back({"rx", "rank-weak-marker", 0.02, false, 1});

  std::vector<Template> templates;
  const char* markers[5] = {"rank-zero-marker", "rank-one-marker",
                            "rank-weak-marker", "rank-weak-marker",
                            "rank-weak-marker"};
  for (int t = 0; t < 5; ++t) {
    Template tpl;
    tpl.id = t;
    tpl.root = t;
    tpl.text = std::string(markers[t]) + " scenario [INSERT PROMPT HERE]";
    tpl.jailbreaks = 50 - t;  // ranked in id order
    tpl.attempts = 100;
    templates.push_back(tpl);
  }

  SimulatedTarget target(spec);
  SimulatedJudge judge;
  EvaluateResult eval =
      run_evaluate(templates, spec.question_texts(), target, judge);

  require(std::abs(eval.top_k_asr(5) - 92.0) < 1e-9,
          "Top-5 Template ASR = " + fmt(eval.top_k_asr(5)) + ", expected 92");
  require(std::abs(eval.metrics.asr_percent - 92.0) < 1e-9,
          "union ASR = " + fmt(eval.metrics.asr_percent) + ", expected 92");

  // per-question query counts stop at the first jailbreak
  std::map<int, int> first_jb_query;  // question -> queries until break
  std::map<int, int> seen;
  for (const AttackRecord& rec : eval.records) {
    seen[rec.question_id] += 1;
    if (rec.verdict == Verdict::Jailbreak) {
      require(first_jb_query.count(rec.question_id) == 0,
              "question queried after its jailbreak");
      first_jb_query[rec.question_id] = seen[rec.question_id];
    }
  }
  for (int q = 0; q < 100; ++q) {
    int used = eval.queries_per_question.at(q);
    if (q < 60) {
      require(used == 1, "easy question should break on the top template");
    } else if (q < 92) {
      require(used == 2, "medium question should break on the second template");
    } else {
      require(used == 5, "unreachable question should try every template");
    }
    if (first_jb_query.count(q) != 0) {
      require(first_jb_query[q] == used,
              "queries continued past the first jailbreak");
    }
  }
  require(eval.metrics.total_queries == 60 * 1 + 32 * 2 + 8 * 5,
          "unexpected total query count");
  require(std::abs(eval.top_k_asr(1) - 60.0) < 1e-9,
          "Top-1 Template ASR = " + fmt(eval.top_k_asr(1)) + ", expected 60");
}

struct Criterion {
  const char* name;
  std::function<void()> run;
};

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) g_cli_path = argv[1];

  const std::vector<Criterion> criteria = {
      {"C1 q-learning update exactness (1000 cases, 1e-12)",
       criterion_q_update_exactness},
      {"C2 epsilon-greedy statistics (chi-square, smoothing)",
       criterion_epsilon_greedy_statistics},
      {"C3 early-exit bounds ({30,200,500} -> {4,20,20}, exact consumption)",
       criterion_early_exit_bounds},
      {"C4 budget safety and monotonicity (200 random campaigns)",
       criterion_budget_safety},
      {"C5 brute-force oracle equivalence (static closure)",
       criterion_brute_force_equivalence},
      {"C6 ablation ordering (medians over seeds 1..10)",
       criterion_ablation_ordering},
      {"C7 determinism (byte-identical simulate logs)", criterion_determinism},
      {"C8 metric formula fidelity (98.5%, 20.30 +- 0.01)",
       criterion_metric_fidelity},
      {"C9 mutation structural contracts (1000 templates)",
       criterion_mutation_contracts},
      {"C10 evaluate protocol (top-5 = 92%, stop at first break)",
       criterion_evaluate_protocol},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    auto start = std::chrono::steady_clock::now();
    try {
      c.run();
      double secs = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
      std::cout << "[PASS] " << c.name << " (" << secs << "s)\n";
    } catch (const CheckFailure& f) {
      ++failures;
      std::cout << "[FAIL] " << c.name << ": " << f.message << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << c.name << ": unexpected exception: " << e.what()
                << "\n";
    }
  }
  if (failures != 0) {
    std::cout << failures << " of " << criteria.size()
              << " acceptance criteria failed\n";
    return 1;
  }
  std::cout << "all " << criteria.size() << " acceptance criteria passed\n";
  return 0;
}
