#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "pfuzz/ablation.hpp"
#include "pfuzz/reporting.hpp"
#include "pfuzz/simulator.hpp"

using namespace pfuzz;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("pfuzz_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::ifstream in(file);
  REQUIRE(in.good());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<AttackRecord> parse_attack_log(const fs::path& file) {
  std::vector<AttackRecord> out;
  for (const std::string& line : read_lines(file)) {
    nlohmann::json j = nlohmann::json::parse(line);
    AttackRecord rec;
    rec.query_index = j["query_index"];
    rec.template_id = j["template_id"];
    rec.question_id = j["question_id"];
    rec.attack_prompt = j["prompt"];
    rec.response = j["response"];
    rec.verdict =
        j["verdict"] == "jailbreak" ? Verdict::Jailbreak : Verdict::Refusal;
    out.push_back(std::move(rec));
  }
  return out;
}

CampaignResult run_sim_campaign(int budget, std::uint64_t seed,
                                EventSink* sink = nullptr) {
  SimulatedTargetSpec spec = canonical_spec();
  CampaignConfig cfg;
  cfg.query_budget = budget;
  cfg.rng_seed = seed;
  cfg.worker_count = 2;
  SimulatedTarget target(spec);
  SimulatedMutator mutator(spec.mutator, PromptLibrary::builtin());
  SimulatedJudge judge;
  Clients clients{&target, &mutator, &judge};
  return run_campaign(canonical_seed_texts(), spec.question_texts(), cfg,
                      clients, PromptLibrary::builtin(), sink);
}

}  // namespace

TEST_CASE("live attack log carries one record per query, indices 1..n") {
  fs::path dir = temp_dir("live_log");
  {
    AttackLogWriter writer(dir / "attacks.jsonl", {});
    CampaignResult result = run_sim_campaign(43, 1, &writer);
    CHECK(writer.written() == result.metrics.total_queries);
  }
  auto lines = read_lines(dir / "attacks.jsonl");
  CHECK(lines.size() == 43);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    nlohmann::json j = nlohmann::json::parse(lines[i]);
    CHECK(j["query_index"] == static_cast<int>(i) + 1);
    CHECK(j["v"] == 1);
    CHECK((j["verdict"] == "jailbreak" || j["verdict"] == "refusal"));
  }
}

TEST_CASE("three-query campaign writes exactly three records") {
  fs::path dir = temp_dir("three");
  CampaignResult result = run_sim_campaign(3, 2);
  write_attack_log(result.state.records, dir / "attacks.jsonl", {});
  auto lines = read_lines(dir / "attacks.jsonl");
  REQUIRE(lines.size() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(nlohmann::json::parse(lines[i])["query_index"] == i + 1);
  }
}

TEST_CASE("summary numbers are recomputable from the attack log") {
  fs::path dir = temp_dir("summary");
  SimulatedTargetSpec spec = canonical_spec();
  CampaignConfig cfg;
  cfg.query_budget = 300;
  cfg.rng_seed = 5;
  SimulatedTarget target(spec);
  SimulatedMutator mutator(spec.mutator, PromptLibrary::builtin());
  SimulatedJudge judge;
  Clients clients{&target, &mutator, &judge};
  CampaignResult result = run_campaign(canonical_seed_texts(),
                                       spec.question_texts(), cfg, clients);
  CampaignReport report = build_report(result.state, result.metrics);
  persist_report(report, cfg, dir, {});
  write_attack_log(result.state.records, dir / "attacks.jsonl", {});

  CampaignMetrics recomputed =
      compute_metrics(parse_attack_log(dir / "attacks.jsonl"),
                      static_cast<int>(spec.questions.size()));

  nlohmann::json summary = nlohmann::json::parse(slurp(dir / "summary.json"));
  CHECK(summary["format_version"] == 1);
  CHECK(summary["metrics"]["asr_percent"].get<double>() ==
        doctest::Approx(recomputed.asr_percent));
  CHECK(summary["metrics"]["total_queries"] == recomputed.total_queries);
  CHECK(summary["metrics"]["jailbroken_questions"] ==
        recomputed.jailbroken_question_count);
  CHECK(summary["metrics"]["jailbreaking_templates"] ==
        recomputed.jailbreaking_template_count);
  if (recomputed.avg_queries_per_jailbreak) {
    CHECK(summary["metrics"]["avg_queries_per_jailbreak"].get<double>() ==
          doctest::Approx(*recomputed.avg_queries_per_jailbreak));
  }

  // config echo round-trips the headline knobs
  CHECK(summary["config"]["query_budget"] == 300);
  CHECK(summary["config"]["rng_seed"] == 5);

  // a q-table dump and the template set exist with version headers
  auto qlines = read_lines(dir / "qtables.txt");
  REQUIRE_FALSE(qlines.empty());
  CHECK(qlines.front().find("format-version 1") != std::string::npos);
}

TEST_CASE("template set round-trips and reproduces recorded jailbreaks") {
  fs::path dir = temp_dir("template_set");
  SimulatedTargetSpec spec = canonical_spec();
  CampaignResult result = run_sim_campaign(400, 7);
  CampaignReport report = build_report(result.state, result.metrics);
  persist_report(report, CampaignConfig{}, dir, {});

  std::vector<Template> loaded = load_template_set(dir / "templates.jsonl");
  REQUIRE(loaded.size() == result.state.registry.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    const Template& a = loaded[i];
    const Template& b = result.state.registry[i];
    CHECK(a.id == b.id);
    CHECK(a.text == b.text);
    CHECK(a.parent == b.parent);
    CHECK(a.root == b.root);
    CHECK(a.mutation_applied == b.mutation_applied);
    CHECK(a.attempts == b.attempts);
    CHECK(a.jailbreaks == b.jailbreaks);
  }

  // every jailbreak recorded in the campaign re-occurs when the reloaded
  // template set is evaluated against the same simulator spec
  std::map<int, std::set<int>> recorded;  // template id -> question ids
  for (const AttackRecord& rec : result.state.records) {
    if (rec.verdict == Verdict::Jailbreak) {
      recorded[rec.template_id].insert(rec.question_id);
    }
  }
  SimulatedTarget target(spec);
  SimulatedJudge judge;
  for (const auto& [tid, questions] : recorded) {
    EvaluateResult eval = run_evaluate({loaded[tid]}, spec.question_texts(),
                                       target, judge);
    std::set<int> broken;
    for (const AttackRecord& rec : eval.records) {
      if (rec.verdict == Verdict::Jailbreak) broken.insert(rec.question_id);
    }
    for (int qid : questions) CHECK(broken.count(qid) == 1);
  }
}

TEST_CASE("redaction digests responses without changing metrics") {
  fs::path dir = temp_dir("redact");
  CampaignResult result = run_sim_campaign(60, 3);
  ReportOptions redacted;
  redacted.redact_responses = true;
  write_attack_log(result.state.records, dir / "attacks.jsonl", redacted);
  auto records = parse_attack_log(dir / "attacks.jsonl");
  bool any_jailbreak = false;
  for (const AttackRecord& rec : records) {
    CHECK(rec.response.rfind("digest:", 0) == 0);
    any_jailbreak |= rec.verdict == Verdict::Jailbreak;
  }
  CHECK(any_jailbreak);
  CampaignMetrics from_redacted = compute_metrics(records, 50);
  CHECK(from_redacted.asr_percent ==
        doctest::Approx(result.metrics.asr_percent));
  CHECK(from_redacted.total_queries == result.metrics.total_queries);
}

TEST_CASE("jsonl loader reads text records and reports malformed lines") {
  fs::path dir = temp_dir("loader");
  {
    std::ofstream out(dir / "ok.jsonl");
    out << R"({"text": "first seed [INSERT PROMPT HERE]"})" << "\n";
    out << "\n";  // blank lines are fine
    out << R"({"text": "second"})" << "\n";
  }
  auto texts = load_text_records(dir / "ok.jsonl");
  REQUIRE(texts.size() == 2);
  CHECK(texts[0] == "first seed [INSERT PROMPT HERE]");

  {
    std::ofstream out(dir / "bad.jsonl");
    out << R"({"text": "fine"})" << "\n";
    out << R"({"text": "fine"})" << "\n";
    out << R"(not json)" << "\n";
  }
  CHECK_THROWS_WITH_AS(load_text_records(dir / "bad.jsonl"),
                       doctest::Contains(":3:"), ValidationError);

  CHECK_THROWS_AS(load_text_records(dir / "missing.jsonl"), ValidationError);
}

TEST_CASE("csv loader handles quoted fields with commas and newlines") {
  fs::path dir = temp_dir("csv");
  {
    std::ofstream out(dir / "seeds.csv");
    out << "index,text\n";
    out << "0,\"hello, world [INSERT PROMPT HERE]\"\n";
    out << "1,\"line one\nline two\"\n";
    out << "2,plain\n";
  }
  auto texts = load_text_records(dir / "seeds.csv");
  REQUIRE(texts.size() == 3);
  CHECK(texts[0] == "hello, world [INSERT PROMPT HERE]");
  CHECK(texts[1] == "line one\nline two");
  CHECK(texts[2] == "plain");

  {
    std::ofstream out(dir / "nohdr.csv");
    out << "a,b\n0,x\n";
  }
  CHECK_THROWS_WITH_AS(load_text_records(dir / "nohdr.csv"),
                       doctest::Contains("text"), ValidationError);
}

TEST_CASE("evaluate attacks in ranked order and stops per question on a break") {
  // five templates with distinct marker-driven potencies on 20 questions
  SimulatedTargetSpec spec;
  for (int i = 0; i < 20; ++i) {
    char num[16];
    std::snprintf(num, sizeof(num), "%02d", i);
    spec.questions.push_back(
        {"eval question " + std::string(num), 0.04 + 0.05 * i});
  }
  for (int t = 0; t < 5; ++t) {
    spec.features.push_back({"m" + std::to_string(t),
                             "marker-" + std::to_string(t),
                             0.9 - 0.15 * t, false, 1});
  }
  std::vector<Template> templates;
  for (int t = 0; t < 5; ++t) {
    Template tpl;
    tpl.id = t;
    tpl.root = t;
    tpl.text = "marker-" + std::to_string(t) + " [INSERT PROMPT HERE]";
    tpl.jailbreaks = 100 - t;  // rank order = id order
    tpl.attempts = 100;
    templates.push_back(tpl);
  }
  SimulatedTarget target(spec);
  SimulatedJudge judge;
  EvaluateResult eval =
      run_evaluate(templates, spec.question_texts(), target, judge);

  CHECK(eval.ranked.front().id == 0);
  // potency of template 0 is 0.9: it breaks every question with d <= 0.9,
  // which is all 18 of the first questions (d up to 0.90) -- check stop-at-
  // first-break: those questions consumed exactly one query
  for (const auto& [qid, used] : eval.queries_per_question) {
    double d = spec.questions[qid].difficulty;
    if (d <= 0.9) {
      CHECK(used == 1);
      CHECK(eval.first_break_rank.at(qid) == 0);
    } else {
      CHECK(used == 5);  // all templates tried, none broke
      CHECK(eval.first_break_rank.count(qid) == 0);
    }
  }
  CHECK(static_cast<int>(eval.records.size()) <=
        5 * static_cast<int>(spec.questions.size()));
  CHECK(eval.top_k_asr(1) == doctest::Approx(eval.top_k_asr(5)));
}

TEST_CASE("ablation matrix names resolve and unknown names are rejected") {
  CampaignConfig base;
  CampaignConfig g4 = apply_ablation("G4", base);
  CHECK_FALSE(g4.upgrades.refusal_suppression);
  CHECK_FALSE(g4.upgrades.warmup);
  CHECK_FALSE(g4.upgrades.early_exit);
  CHECK_FALSE(g4.upgrades.mab_template_selection);
  CHECK_FALSE(g4.upgrades.qlearning_mutation_selection);
  CHECK(g4.upgrades.question_pruning);  // engineering upgrade stays on

  CampaignConfig g3a = apply_ablation("G3.a", base);
  CHECK_FALSE(g3a.upgrades.early_exit);
  CHECK(g3a.upgrades.warmup);

  CHECK_THROWS_AS(apply_ablation("G9.z", base), ValidationError);
  CHECK(ablation_config_names().size() == 14);
}

TEST_CASE("median helper") {
  CHECK(median({3.0, 1.0, 2.0}) == doctest::Approx(2.0));
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == doctest::Approx(2.5));
  CHECK(median({}) == doctest::Approx(0.0));
}

TEST_CASE("full matrix, fixed seed: no ablated row beats the full engine") {
  SimulatedTargetSpec spec = canonical_spec();
  CampaignConfig base;
  base.query_budget = 1000;
  AblationMatrixResult matrix = run_ablation_matrix(
      spec, canonical_seed_texts(), base, {1}, ablation_config_names());
  REQUIRE(matrix.rows.front().name == "G0");
  double g0 = matrix.rows.front().median_asr;
  for (const AblationRow& row : matrix.rows) {
    CHECK(g0 >= row.median_asr);
  }
  CHECK_FALSE(format_ablation_table(matrix).empty());
}
