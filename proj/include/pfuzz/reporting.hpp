#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pfuzz/engine.hpp"

namespace pfuzz {

struct ReportOptions {
  // Replace response bodies with digests in the attack log and artifact
  // list; metrics are unaffected.
  bool redact_responses = false;
};

// One attack record as a single JSON line (format-version field "v").
std::string attack_record_json(const AttackRecord& record, bool redact);

// Line-delimited attack log, one object per completed query.
void write_attack_log(std::span<const AttackRecord> records,
                      const std::filesystem::path& file,
                      const ReportOptions& options);

// EventSink that appends each attack record to `file` as it completes and
// flushes per line, so partial logs survive crashes.
class AttackLogWriter : public EventSink {
 public:
  AttackLogWriter(const std::filesystem::path& file,
                  const ReportOptions& options);
  void on_attack(const AttackRecord& record) override;
  int written() const { return written_; }

 private:
  std::ofstream stream_;
  ReportOptions options_;
  int written_ = 0;
};

// Everything the summary artifacts are built from; every number here is
// recomputable from the attack record log.
struct CampaignReport {
  CampaignMetrics metrics;
  std::vector<Template> templates;  // full registry in id order
  std::vector<bool> accepted;       // parallel to templates
  int seed_count = 0;
  std::map<MutationKind, MutationUsage> mutation_usage;
  std::map<std::pair<int, int>, double> mutation_q_entries;
  std::map<int, double> template_q_entries;
  double epsilon_mutation = 0.0;
  double epsilon_template = 0.0;
  int iterations = 0;
  std::vector<AttackRecord> jailbreak_artifacts;  // jailbreak verdicts only
};

CampaignReport build_report(const CampaignState& state,
                            const CampaignMetrics& metrics);

// Writes summary.json, qtables.txt and templates.jsonl into out_dir. The
// attack log is written separately (live via AttackLogWriter or by
// write_attack_log). The summary goes through a temp file and renames into
// place so a failed write leaves no half-written summary behind.
void persist_report(const CampaignReport& report, const CampaignConfig& cfg,
                    const std::filesystem::path& out_dir,
                    const ReportOptions& options);

// --- input loaders -------------------------------------------------------
// Seeds and questions are line-delimited JSON records with a "text" field.
// Files ending in .csv are accepted for GPTFuzzer-style seed sheets and
// converted on ingest (header row, "text" column). Errors carry file and
// line numbers.
std::vector<std::string> load_text_records(const std::filesystem::path& file);

// templates.jsonl as written by persist_report; used by `evaluate`.
std::vector<Template> load_template_set(const std::filesystem::path& file);

// --- evaluate mode -------------------------------------------------------
// Applies a fixed template set to a question set with no mutation: templates
// are ranked once, each question is attacked in ranked order and left alone
// after its first jailbreak. A question counts as jailbroken when any
// template breaks it.
struct EvaluateResult {
  std::vector<Template> ranked;  // order used for attribution
  std::vector<AttackRecord> records;
  CampaignMetrics metrics;
  // question id -> 0-based rank of the first template that broke it
  std::map<int, int> first_break_rank;
  std::map<int, int> queries_per_question;
  double top_k_asr(int k) const;  // derived from first_break_rank
};

EvaluateResult run_evaluate(std::vector<Template> templates,
                            const std::vector<std::string>& question_texts,
                            ChatClient& target, JudgeClient& judge,
                            const std::string& placeholder = kDefaultPlaceholder,
                            EventSink* sink = nullptr);

}  // namespace pfuzz
