#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pfuzz {

// Question placeholder every template must contain exactly once. Seed files
// following the GPTFuzzer CSV convention use the same literal. Overridable
// per campaign via CampaignConfig::placeholder.
inline constexpr const char* kDefaultPlaceholder = "[INSERT PROMPT HERE]";

enum class Verdict : std::uint8_t { Jailbreak, Refusal };

const char* to_string(Verdict v);

enum class MutationKind : std::uint8_t {
  Identity,
  RefusalSuppression,
  InjectPrefix,
  ExpandAfter,
  TransferMutation,
  FewShots,
  Generate,
  Crossover,
  Expand,
  Shorten,
  Rephrase,
};

inline constexpr int kMutationKindCount = 11;

// Identity, RefusalSuppression and InjectPrefix run locally; the rest go
// through the mutator model.
bool is_static_mutation(MutationKind kind);

const char* to_string(MutationKind kind);
std::optional<MutationKind> mutation_kind_from_string(const std::string& name);

// All mutation kinds in enum order; selectors index Q-tables by this set.
std::span<const MutationKind> all_mutation_kinds();

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A prompt skeleton plus lineage and attack statistics. `root` is the seed
// this template descends from (itself for seeds); lineage links form a
// forest rooted at the seed set.
struct Template {
  int id = 0;
  std::string text;
  std::optional<int> parent;
  int root = 0;
  std::optional<MutationKind> mutation_applied;
  int attempts = 0;
  int jailbreaks = 0;

  bool is_seed() const { return !parent.has_value(); }
};

enum class QuestionStatus : std::uint8_t { Unbroken, Jailbroken };

struct BrokenBy {
  int template_id = 0;
  int record_index = 0;  // query_index of the jailbreaking attack record
};

struct Question {
  int id = 0;
  std::string text;
  QuestionStatus status = QuestionStatus::Unbroken;
  std::optional<BrokenBy> broken_by;
};

// One completed target-model query. query_index is 1-based and strictly
// increasing in dispatch order within a campaign.
struct AttackRecord {
  int template_id = 0;
  int question_id = 0;
  std::string attack_prompt;
  std::string response;
  Verdict verdict = Verdict::Refusal;
  int query_index = 0;
};

struct CampaignMetrics {
  double asr_percent = 0.0;
  // n/a when no question was jailbroken; never infinity or zero.
  std::optional<double> avg_queries_per_jailbreak;
  int jailbreaking_template_count = 0;
  int total_queries = 0;
  int jailbroken_question_count = 0;
};

// Recomputes every metric from the raw attack log; jailbroken questions and
// jailbreaking templates are counted as distinct ids with at least one
// Jailbreak verdict.
CampaignMetrics compute_metrics(std::span<const AttackRecord> records,
                                int initial_question_count);

// Ranking used everywhere templates are ordered: more jailbreaks first,
// then fewer attempts, then lower id.
bool template_rank_less(const Template& a, const Template& b);
std::vector<Template> rank_templates(std::vector<Template> templates);

// Percentage of evaluation questions jailbroken by at least one of the
// top-k templates of `ranked_templates` (already ranked). k larger than the
// available template count uses all of them.
double top_k_template_asr(
    std::span<const Template> ranked_templates, int k,
    const std::map<std::pair<int, int>, Verdict>& eval_results,
    int eval_question_count);

// Number of placeholder occurrences in a template text.
int count_placeholder(const std::string& text, const std::string& placeholder);

// Throws ValidationError naming the template when the single-placeholder
// invariant does not hold.
void validate_template_text(int template_id, const std::string& text,
                            const std::string& placeholder);

// Byte-exact placeholder substitution; no other edits.
std::string substitute(const Template& t, const Question& q,
                       const std::string& placeholder = kDefaultPlaceholder);

// Queries consumed up to and including the jailbreak of the n-th distinct
// question (nullopt when fewer than n questions were broken).
std::optional<int> queries_to_reach_jailbreaks(
    std::span<const AttackRecord> records, int n);

}  // namespace pfuzz
