#include "pfuzz/selection.hpp"

#include <algorithm>
#include <stdexcept>

namespace pfuzz {

void EpsilonSchedule::decay() {
  current = std::max(minimum, current * decay_factor);
}

std::size_t smoothed_weighted_pick(std::span<const double> weights,
                                   double delta, Rng& rng) {
  if (weights.empty()) {
    throw std::invalid_argument("smoothed_weighted_pick: empty candidate set");
  }
  double lo = *std::min_element(weights.begin(), weights.end());
  double shift = lo < 0.0 ? -lo : 0.0;  // only negatives get lifted to zero
  std::vector<double> shifted(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    shifted[i] = weights[i] + shift + delta;
  }
  return rng.weighted_index(shifted);
}

namespace {

void check_reward(double r) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument("reward must lie in [0, 1], got " +
                                std::to_string(r));
  }
}

}  // namespace

double MutationQTable::value(int root_id, MutationKind m) const {
  auto it = entries_.find({root_id, static_cast<int>(m)});
  return it == entries_.end() ? 0.0 : it->second;
}

double MutationQTable::max_value(int root_id) const {
  double best = 0.0;  // unseen actions read as 0
  for (MutationKind m : all_mutation_kinds()) {
    best = std::max(best, value(root_id, m));
  }
  return best;
}

MutationKind MutationQTable::select(const Template& t,
                                    std::span<const MutationKind> compatible,
                                    Rng& rng) const {
  if (compatible.empty()) {
    throw std::invalid_argument("select_mutation: empty compatible set");
  }
  if (rng.next_double() < params_.epsilon.current) {
    return compatible[rng.uniform_index(compatible.size())];
  }
  std::vector<double> weights;
  weights.reserve(compatible.size());
  for (MutationKind m : compatible) weights.push_back(value(t.root, m));
  return compatible[smoothed_weighted_pick(weights, params_.smoothing_delta,
                                           rng)];
}

void MutationQTable::reward(const Template& t, MutationKind m, double r) {
  check_reward(r);
  double old = value(t.root, m);
  double best = max_value(t.root);
  entries_[{t.root, static_cast<int>(m)}] =
      (1.0 - params_.alpha) * old + params_.alpha * (r + params_.gamma * best);
}

void TemplateQTable::ensure_entry(int template_id) {
  entries_.emplace(template_id, 0.0);
}

double TemplateQTable::value(int template_id) const {
  auto it = entries_.find(template_id);
  return it == entries_.end() ? 0.0 : it->second;
}

double TemplateQTable::max_value() const {
  double best = 0.0;
  for (const auto& [id, v] : entries_) best = std::max(best, v);
  return best;
}

int TemplateQTable::select(std::span<const int> population_ids,
                           Rng& rng) const {
  if (population_ids.empty()) {
    throw std::invalid_argument("select_template: empty population");
  }
  if (rng.next_double() < params_.epsilon.current) {
    return population_ids[rng.uniform_index(population_ids.size())];
  }
  std::vector<double> weights;
  weights.reserve(population_ids.size());
  for (int id : population_ids) weights.push_back(value(id));
  return population_ids[smoothed_weighted_pick(weights,
                                               params_.smoothing_delta, rng)];
}

void TemplateQTable::reward(int template_id, double r) {
  check_reward(r);
  double old = value(template_id);
  double best = max_value();
  entries_[template_id] =
      (1.0 - params_.alpha) * old + params_.alpha * (r + params_.gamma * best);
}

}  // namespace pfuzz
