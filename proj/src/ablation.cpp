#include "pfuzz/ablation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pfuzz {

std::vector<std::string> ablation_config_names() {
  return {"G0",   "G1.a", "G1.b", "G1.c", "G1.d", "G1.e", "G1.f", "G2.a",
          "G2.b", "G2.c", "G3.a", "G3.b", "G3.c", "G4"};
}

CampaignConfig apply_ablation(const std::string& name, CampaignConfig base) {
  UpgradeFlags& u = base.upgrades;
  auto no_new_mutations = [&] {
    u.refusal_suppression = false;
    u.inject_prefix = false;
    u.expand_after = false;
    u.transfer_mutation = false;
    u.few_shots = false;
  };
  auto no_new_selection = [&] {
    u.qlearning_mutation_selection = false;
    u.mab_template_selection = false;
  };
  auto no_efficiency = [&] {
    u.early_exit = false;
    u.warmup = false;
  };
  if (name == "G0") {
    // full engine
  } else if (name == "G1.a") {
    u.refusal_suppression = false;
  } else if (name == "G1.b") {
    u.inject_prefix = false;
  } else if (name == "G1.c") {
    u.expand_after = false;
  } else if (name == "G1.d") {
    u.transfer_mutation = false;
  } else if (name == "G1.e") {
    u.few_shots = false;
  } else if (name == "G1.f") {
    no_new_mutations();
  } else if (name == "G2.a") {
    u.mab_template_selection = false;
  } else if (name == "G2.b") {
    u.qlearning_mutation_selection = false;
  } else if (name == "G2.c") {
    no_new_selection();
  } else if (name == "G3.a") {
    u.early_exit = false;
  } else if (name == "G3.b") {
    u.warmup = false;
  } else if (name == "G3.c") {
    no_efficiency();
  } else if (name == "G4") {
    no_new_mutations();
    no_new_selection();
    no_efficiency();
  } else {
    throw ValidationError("unknown ablation configuration: " + name);
  }
  return base;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

AblationMatrixResult run_ablation_matrix(
    const SimulatedTargetSpec& spec, const std::vector<std::string>& seeds,
    const CampaignConfig& base, const std::vector<std::uint64_t>& rng_seeds,
    const std::vector<std::string>& names) {
  AblationMatrixResult result;
  const std::vector<std::string> questions = spec.question_texts();
  for (const std::string& name : names) {
    AblationRow row;
    row.name = name;
    for (std::uint64_t rng_seed : rng_seeds) {
      CampaignConfig cfg = apply_ablation(name, base);
      cfg.rng_seed = rng_seed;
      SimulatedTarget target(spec);
      SimulatedMutator mutator(spec.mutator, PromptLibrary::builtin());
      SimulatedJudge judge;
      Clients clients{&target, &mutator, &judge};
      CampaignResult campaign = run_campaign(seeds, questions, cfg, clients);

      AblationRunStats stats;
      stats.rng_seed = rng_seed;
      stats.asr_percent = campaign.metrics.asr_percent;
      stats.avg_queries_per_jailbreak =
          campaign.metrics.avg_queries_per_jailbreak;
      stats.jailbreaks = campaign.metrics.jailbroken_question_count;
      stats.total_queries = campaign.metrics.total_queries;
      stats.jailbreaking_templates =
          campaign.metrics.jailbreaking_template_count;
      for (int n = 1; n <= stats.jailbreaks; ++n) {
        auto q = queries_to_reach_jailbreaks(campaign.state.records, n);
        stats.queries_at_jailbreak.push_back(q.value_or(0));
      }
      row.runs.push_back(std::move(stats));
    }
    std::vector<double> asr;
    std::vector<double> qpj;
    for (const AblationRunStats& s : row.runs) {
      asr.push_back(s.asr_percent);
      if (s.avg_queries_per_jailbreak) {
        qpj.push_back(*s.avg_queries_per_jailbreak);
      }
    }
    row.median_asr = median(asr);
    if (!qpj.empty()) row.median_queries_per_jailbreak = median(qpj);
    result.rows.push_back(std::move(row));
  }
  return result;
}

std::string format_ablation_table(const AblationMatrixResult& result) {
  std::ostringstream out;
  out << "config  runs  median-ASR%  median-queries/jailbreak  "
         "median-templates\n";
  char line[160];
  for (const AblationRow& row : result.rows) {
    std::vector<double> templates;
    for (const AblationRunStats& s : row.runs) {
      templates.push_back(static_cast<double>(s.jailbreaking_templates));
    }
    if (row.median_queries_per_jailbreak) {
      std::snprintf(line, sizeof(line), "%-7s %4zu  %10.1f  %24.2f  %16.1f\n",
                    row.name.c_str(), row.runs.size(), row.median_asr,
                    *row.median_queries_per_jailbreak, median(templates));
    } else {
      std::snprintf(line, sizeof(line), "%-7s %4zu  %10.1f  %24s  %16.1f\n",
                    row.name.c_str(), row.runs.size(), row.median_asr, "n/a",
                    median(templates));
    }
    out << line;
  }
  return out.str();
}

}  // namespace pfuzz
