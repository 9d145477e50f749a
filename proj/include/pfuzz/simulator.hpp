#pragma once

#include <cstdint>
#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include "pfuzz/clients.hpp"
#include "pfuzz/core.hpp"
#include "pfuzz/prompts.hpp"

namespace pfuzz {

// Deterministic in-process stand-ins for the three model roles. A simulated
// target computes a potency score from the template text (question text and
// placeholder stripped) and jailbreaks exactly when potency >= the embedded
// question's difficulty, so campaign outcomes can be brute-forced by
// enumeration.

struct SimQuestion {
  std::string text;
  double difficulty = 0.5;  // in [0, 1]
};

struct SimFeature {
  std::string name;
  std::string pattern;  // ECMAScript regex matched against the skeleton
  double weight = 0.0;
  bool per_match = false;  // weight once vs. weight * min(matches, max)
  int max_matches = 1;
};

struct LengthBonus {
  int min_length = 0;  // added when skeleton length >= min_length
  double weight = 0.0;
};

struct SimMutatorParams {
  std::uint64_t seed = 1;
  double invalid_rate = 0.0;  // fraction of responses without answer tags
  std::vector<std::string> phrases;
};

struct SimulatedTargetSpec {
  int format_version = 1;
  std::string placeholder = kDefaultPlaceholder;
  double base_potency = 0.0;
  double noise_amplitude = 0.0;
  std::uint64_t noise_seed = 0;
  std::vector<SimQuestion> questions;
  std::vector<SimFeature> features;
  std::vector<LengthBonus> length_bonuses;
  SimMutatorParams mutator;

  std::vector<std::string> question_texts() const;

  std::string to_json() const;
  static SimulatedTargetSpec from_json(const std::string& json_text);
  static SimulatedTargetSpec load_file(const std::filesystem::path& path);
  void save_file(const std::filesystem::path& path) const;
};

// Sum of matched feature weights plus length bonuses and base, clamped to
// [0, 1]. The placeholder token is stripped before matching so a template
// and the attack prompts built from it score identically.
double potency(const std::string& template_text,
               const SimulatedTargetSpec& spec);

inline constexpr const char* kUnsafeMarker = "UNSAFE:";
inline constexpr const char* kRefusalText = "I can't help with that.";

class SimulatedTarget : public ChatClient {
 public:
  explicit SimulatedTarget(SimulatedTargetSpec spec);
  ChatResponse chat(const ChatRequest& request) override;
  const SimulatedTargetSpec& spec() const { return spec_; }

 private:
  SimulatedTargetSpec spec_;
  // feature regexes compiled once; chat() is called from worker threads
  std::vector<std::regex> compiled_;
};

// Jailbreak exactly when the response carries the simulator unsafe marker.
class SimulatedJudge : public JudgeClient {
 public:
  Verdict classify(const std::string& question,
                   const std::string& response) override;
};

// Applies deterministic text edits keyed on a hash of the incoming prompt:
// instruction prompts built by build_mutator_prompt are recognized by their
// structural tags, the embedded template is extracted and edited with
// phrases from the bank, and example-driven mutations copy over the refusal
// block, the inject prefix and bank phrases found in the examples.
class SimulatedMutator : public ChatClient {
 public:
  SimulatedMutator(SimMutatorParams params, const PromptLibrary& lib)
      : params_(std::move(params)), lib_(&lib) {}
  ChatResponse chat(const ChatRequest& request) override;

 private:
  std::string transform(const std::string& prompt) const;
  SimMutatorParams params_;
  const PromptLibrary* lib_;
};

// The spec used by `simulate`, the ablation matrix and the acceptance suite:
// 50 questions with difficulties spread over [0.1, 0.9]; feature weights let
// the seeds alone break the easiest ~20% while the hardest 30% need refusal
// suppression and prefix injection on top of a strong seed.
SimulatedTargetSpec canonical_spec();

// Benign roleplay seeds paired with canonical_spec(); each carries a marker
// phrase the spec maps to a per-seed base potency.
std::vector<std::string> canonical_seed_texts();

}  // namespace pfuzz
