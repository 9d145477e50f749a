#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pfuzz/engine.hpp"
#include "pfuzz/simulator.hpp"

namespace pfuzz {

// Named configurations for the upgrade ablation matrix. G0 is the full
// engine; G1.* remove mutations, G2.* selection policies, G3.* efficiency
// heuristics; G4 removes everything at once (baseline-fuzzer mode).
std::vector<std::string> ablation_config_names();

// Applies the named row to a base configuration; throws ValidationError on
// an unknown name.
CampaignConfig apply_ablation(const std::string& name, CampaignConfig base);

struct AblationRunStats {
  std::uint64_t rng_seed = 0;
  double asr_percent = 0.0;
  std::optional<double> avg_queries_per_jailbreak;
  int jailbreaks = 0;
  int total_queries = 0;
  int jailbreaking_templates = 0;
  // queries_at_jailbreak[n-1] = queries consumed when the n-th distinct
  // question fell
  std::vector<int> queries_at_jailbreak;
};

struct AblationRow {
  std::string name;
  std::vector<AblationRunStats> runs;
  double median_asr = 0.0;
  // Median over runs with at least one jailbreak; absent when none had any.
  std::optional<double> median_queries_per_jailbreak;
};

struct AblationMatrixResult {
  std::vector<AblationRow> rows;
};

double median(std::vector<double> values);

// Runs every named configuration once per rng seed against fresh simulated
// clients built from `spec`.
AblationMatrixResult run_ablation_matrix(
    const SimulatedTargetSpec& spec, const std::vector<std::string>& seeds,
    const CampaignConfig& base, const std::vector<std::uint64_t>& rng_seeds,
    const std::vector<std::string>& names);

std::string format_ablation_table(const AblationMatrixResult& result);

}  // namespace pfuzz
