#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfuzz/core.hpp"
#include "pfuzz/prompts.hpp"
#include "pfuzz/rng.hpp"

namespace pfuzz {

// Read-only snapshot handed to mutation construction. The engine fills the
// pools each iteration: ids index into `registry`, rankings follow
// template_rank_less, and pool members have jailbreaks >= 1.
struct MutantContext {
  const std::vector<Template>* registry = nullptr;
  // Global top jailbreaking mutants (non-seeds), best first, at most 10.
  std::vector<int> top_jailbreaking;
  // Top jailbreaking mutants sharing root(t), best first, at most 3.
  std::vector<int> same_root_top;
  // Population members other than t, candidates for Crossover.
  std::vector<int> crossover_pool;
  std::string placeholder = kDefaultPlaceholder;
  Rng* rng = nullptr;

  const Template& lookup(int id) const { return (*registry)[id]; }
};

// Subset of mutations that make sense for t, in canonical enum order.
// Identity is always included. InjectPrefix/ExpandAfter drop out when the
// text already ends with the inject-prefix string, RefusalSuppression when
// the suppression block sentinel is already present, TransferMutation /
// FewShots / Crossover when their pools are empty.
std::vector<MutationKind> compatible_mutations(const Template& t,
                                               const MutantContext& ctx,
                                               const PromptLibrary& lib);

// Applies a static mutation locally and returns the fully formed child
// template (lineage recorded, fresh statistics). Throws ValidationError when
// `kind` is not static or not compatible with t.
Template apply_static(MutationKind kind, const Template& t, int new_id,
                      const MutantContext& ctx, const PromptLibrary& lib);

// Builds the single-turn instruction prompt for a model-backed mutation.
// TransferMutation draws its example pair uniformly at random from
// ctx.top_jailbreaking; Crossover draws its partner from ctx.crossover_pool.
// Throws ValidationError when `kind` is static or a required pool is empty.
std::string build_mutator_prompt(MutationKind kind, const Template& t,
                                 const MutantContext& ctx,
                                 const PromptLibrary& lib);

struct MutantParseResult {
  std::optional<std::string> text;  // set on success
  std::string error;                // set on failure
  bool ok() const { return text.has_value(); }
};

// Extracts the substring strictly between the first answer-begin tag and the
// last answer-end tag, trims surrounding whitespace and validates the
// single-placeholder invariant. Any failure yields an invalid mutant.
MutantParseResult parse_mutator_response(const std::string& raw,
                                         const std::string& placeholder,
                                         const PromptLibrary& lib);

// Helper shared with the compatibility rules: true when text ends with the
// suffix after ignoring trailing whitespace.
bool ends_with_ignoring_trailing_space(const std::string& text,
                                       const std::string& suffix);

}  // namespace pfuzz
