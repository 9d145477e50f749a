#pragma once

#include <map>
#include <span>
#include <utility>
#include <vector>

#include "pfuzz/core.hpp"
#include "pfuzz/rng.hpp"

namespace pfuzz {

struct EpsilonSchedule {
  double initial = 1.0;
  double decay_factor = 0.9;
  double minimum = 0.2;
  double current = 1.0;

  // current <- max(minimum, current * decay_factor)
  void decay();
};

struct SelectorParams {
  double alpha = 0.4;
  double gamma = 0.1;
  // Uniform smoothing constant added to min-shifted weights so zero-weight
  // actions stay selectable and all-zero tables degrade to uniform.
  double smoothing_delta = 0.05;
  EpsilonSchedule epsilon;
};

// Weighted-random contract shared by both selectors: a negative minimum is
// shifted up to 0 (reward updates keep tables non-negative, so this only
// matters for externally seeded values), delta is added to every weight,
// then the result is normalized and sampled.
std::size_t smoothed_weighted_pick(std::span<const double> weights,
                                   double delta, Rng& rng);

// Tabular action values keyed by (seed template id, mutation). Missing
// entries read as 0.0; values change only through the reward rule.
class MutationQTable {
 public:
  explicit MutationQTable(SelectorParams params = {}) : params_(params) {}

  double value(int root_id, MutationKind m) const;
  double max_value(int root_id) const;  // over all 11 actions, absent = 0

  // Epsilon-greedy over the compatible set: explore uniformly with
  // probability epsilon.current, otherwise weighted-random over the
  // Q-values of state root(t).
  MutationKind select(const Template& t,
                      std::span<const MutationKind> compatible, Rng& rng) const;

  // Q[root(t)][m] <- (1-a) Q[root(t)][m] + a (r + g max_a Q[root(t)][a]),
  // max taken over the pre-update table. r must lie in [0, 1].
  void reward(const Template& t, MutationKind m, double r);

  SelectorParams& params() { return params_; }
  const SelectorParams& params() const { return params_; }
  const std::map<std::pair<int, int>, double>& entries() const {
    return entries_;
  }

 private:
  SelectorParams params_;
  std::map<std::pair<int, int>, double> entries_;  // (root id, kind) -> value
};

// Flat action-value table over templates; the multi-arm-bandit selector
// tracks no environment state. Every population member gets an entry when
// it joins (default 0.0).
class TemplateQTable {
 public:
  explicit TemplateQTable(SelectorParams params = {}) : params_(params) {}

  void ensure_entry(int template_id);
  double value(int template_id) const;
  double max_value() const;  // over all entries, 0 when empty

  // Epsilon-greedy over the population (ids into the table).
  int select(std::span<const int> population_ids, Rng& rng) const;

  // Q[t] <- (1-a) Q[t] + a (r + g max_a Q[a]), max pre-update, r in [0, 1].
  void reward(int template_id, double r);

  SelectorParams& params() { return params_; }
  const SelectorParams& params() const { return params_; }
  const std::map<int, double>& entries() const { return entries_; }

 private:
  SelectorParams params_;
  std::map<int, double> entries_;
};

}  // namespace pfuzz
