#pragma once

#include <filesystem>
#include <string>
#include <unordered_map>

#include "pfuzz/core.hpp"

namespace pfuzz {

// Texts behind the mutation operators and the judge classifier: the refusal
// suppression instruction block, the fixed inject-prefix string, and one
// instruction prompt per model-backed mutation. Built-in defaults compile
// into the binary; a data directory with the fixed file names below can
// override any of them without code changes.
//
//   refusal_suppression_block.txt   ({TEMPLATE})
//   expand_after.txt / transfer_mutation.txt / few_shots.txt
//   generate.txt / crossover.txt / expand.txt / shorten.txt / rephrase.txt
//   judge.txt                       ({QUESTION}, {RESPONSE})
//
// Mutator prompts carry named placeholders {TEMPLATE}, {SECOND_TEMPLATE},
// {EXAMPLE_ORIGINAL}, {EXAMPLE_MUTANT}, {EXAMPLES} and {PLACEHOLDER}.
class PromptLibrary {
 public:
  static const PromptLibrary& builtin();

  // Starts from the builtin set; files present in `dir` replace individual
  // entries. Throws ValidationError on unreadable files.
  static PromptLibrary from_directory(const std::filesystem::path& dir);

  // "Sure, here is" -- appended by InjectPrefix and checked by the
  // template-mutation compatibility rules.
  const std::string& inject_prefix() const { return inject_prefix_; }

  // Full wrapping block applied by RefusalSuppression; contains {TEMPLATE}.
  const std::string& refusal_block() const { return refusal_block_; }

  // First sentence of the block; its presence in a template marks the block
  // as already applied. Template authors should avoid this exact sentence.
  const std::string& refusal_sentinel() const { return refusal_sentinel_; }

  // Instruction prompt skeleton for a model-backed mutation.
  const std::string& mutation_prompt(MutationKind kind) const;

  const std::string& judge_prompt() const { return judge_prompt_; }

  const std::string& answer_begin_tag() const { return answer_begin_; }
  const std::string& answer_end_tag() const { return answer_end_; }

 private:
  PromptLibrary();

  std::string inject_prefix_;
  std::string refusal_block_;
  std::string refusal_sentinel_;
  std::string judge_prompt_;
  std::string answer_begin_;
  std::string answer_end_;
  std::unordered_map<int, std::string> mutation_prompts_;
};

// Replaces every occurrence of `{name}`-style keys given in `values`.
std::string fill_named_placeholders(
    std::string text,
    const std::unordered_map<std::string, std::string>& values);

}  // namespace pfuzz
