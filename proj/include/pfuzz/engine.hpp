#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pfuzz/clients.hpp"
#include "pfuzz/core.hpp"
#include "pfuzz/mutations.hpp"
#include "pfuzz/prompts.hpp"
#include "pfuzz/rng.hpp"
#include "pfuzz/selection.hpp"
#include "pfuzz/thread_pool.hpp"

namespace pfuzz {

struct EarlyExitConfig {
  double fraction = 0.10;
  int min_questions = 4;
  int max_questions = 20;
  // ConsecutiveMisses: a run of `threshold` misses anywhere in the iteration
  // exits (the counter resets on every jailbreak). FirstWindowOnly: exit
  // only when the first `threshold` prompts all miss.
  enum class Mode { ConsecutiveMisses, FirstWindowOnly };
  Mode mode = Mode::ConsecutiveMisses;
};

// Individually removable upgrades; disabling them all yields the baseline
// fuzzer shape (no warmup, no early exit, random mutation choice, MCTS-style
// template choice, all questions per iteration).
struct UpgradeFlags {
  bool refusal_suppression = true;
  bool inject_prefix = true;
  bool expand_after = true;
  bool transfer_mutation = true;
  bool few_shots = true;
  bool qlearning_mutation_selection = true;  // false: uniform random
  bool mab_template_selection = true;        // false: MCTS-style walk
  bool early_exit = true;                    // also gates the Identity mutation
  bool warmup = true;
  bool question_pruning = true;  // drop questions once jailbroken
};

struct CampaignConfig {
  int query_budget = 4000;
  EarlyExitConfig early_exit;
  double warmup_fraction = 1.0;
  int worker_count = 4;
  std::uint64_t rng_seed = 0;
  bool stop_on_all_broken = true;
  std::string placeholder = kDefaultPlaceholder;
  SelectorParams mutation_selector{0.4, 0.1, 0.05, {1.0, 0.9, 0.2, 1.0}};
  SelectorParams template_selector{0.3, 0.02, 0.05, {1.0, 0.97, 0.2, 1.0}};
  UpgradeFlags upgrades;
  // When set, mutation choice is limited to exactly this subset, overriding
  // the upgrade flags (ablation and test hook).
  std::optional<std::vector<MutationKind>> restrict_kinds;
  double target_temperature = 1.0;
  int target_max_tokens = 512;
  double mutator_temperature = 1.0;
  int mutator_max_tokens = 2048;

  void validate() const;
};

struct Clients {
  ChatClient* target = nullptr;
  ChatClient* mutator = nullptr;
  JudgeClient* judge = nullptr;
};

struct IterationEvent {
  int iteration = 0;  // 0 during warmup
  bool warmup = false;
  int selected_template = -1;
  std::optional<MutationKind> mutation;
  int mutant_id = -1;  // -1 when the mutator response was invalid
  bool mutant_valid = true;
  int dispatched = 0;
  int jailbreaks = 0;
  bool fruitless = false;
  bool accepted = false;
  double reward = 0.0;
  int total_queries = 0;
};

// Progress interface; the orchestrator is the only caller, in dispatch
// order, so implementations need no locking.
class EventSink {
 public:
  virtual ~EventSink() = default;
  virtual void on_attack(const AttackRecord&) {}
  virtual void on_iteration(const IterationEvent&) {}
};

struct MutationUsage {
  int selected = 0;
  int invalid = 0;
  int accepted = 0;
  double reward_sum = 0.0;
};

class CampaignState;

// Minimal MCTS-style template selection kept as the baseline ablation for
// the bandit selector: UCT walk down the lineage forest starting at the
// seeds, rewards backed up through parent links.
class MctsSelector {
 public:
  int select(const CampaignState& state, Rng& rng) const;
  void reward(const CampaignState& state, int template_id, double r);

 private:
  struct Node {
    int visits = 0;
    double value = 0.0;
  };
  double uct(int id, int total_visits) const;
  std::map<int, Node> nodes_;
  double explore_c_ = 1.4142135623730951;
};

class CampaignState {
 public:
  std::vector<Template> registry;  // every template ever created, id-indexed
  std::vector<int> population;     // accepted ids: seeds plus jailbreakers
  int seed_count = 0;
  std::vector<Question> questions;
  std::vector<int> unbroken;  // active question ids, insertion order
  int consumed_queries = 0;
  std::vector<AttackRecord> records;
  MutationQTable mutation_q;
  TemplateQTable template_q;
  MctsSelector mcts;
  Rng rng{0};
  int iteration = 0;
  std::map<MutationKind, MutationUsage> mutation_usage;

  const Template& tpl(int id) const { return registry.at(id); }
  std::vector<int> children_of(int id) const;
  // Questions a fuzzing iteration may attack: the unbroken set, or every
  // question when pruning is disabled.
  std::vector<int> active_questions(const CampaignConfig& cfg) const;
};

struct IterationReport {
  int dispatched = 0;
  std::vector<int> jailbroken_questions;
  bool fruitless = false;
};

struct CampaignResult {
  CampaignState state;
  CampaignMetrics metrics;
};

// ceil(fraction * active) clamped into [min, max] and never above the
// active question count.
int early_exit_threshold(int active_question_count, const EarlyExitConfig& cfg);

CampaignState init_campaign(const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& question_texts,
                            const CampaignConfig& cfg);

// Attacks `candidate_questions` with the mutant in a fresh seeded-random
// order, dispatching batches of worker_count and merging results in
// permutation order. Honors the remaining budget exactly and applies the
// early-exit rule; jailbroken questions leave the unbroken set at batch
// boundaries.
IterationReport evaluate_mutant(int mutant_id,
                                const std::vector<int>& candidate_questions,
                                CampaignState& state,
                                const CampaignConfig& cfg, Clients& clients,
                                ThreadPool& pool, EventSink* sink);

// Evaluates every seed against the warmup question subset, rewarding the
// template table with each seed's observed success rate and crediting the
// Identity action of the seed's own state in the mutation table.
void warmup(CampaignState& state, const CampaignConfig& cfg, Clients& clients,
            ThreadPool& pool, EventSink* sink);

// Warmup followed by the fuzzing loop; stops when the budget is consumed or
// (by default) when every question is jailbroken.
CampaignResult run_campaign(const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& question_texts,
                            const CampaignConfig& cfg, Clients& clients,
                            const PromptLibrary& lib = PromptLibrary::builtin(),
                            EventSink* sink = nullptr);

}  // namespace pfuzz
