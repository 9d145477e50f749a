#include "pfuzz/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pfuzz {

void CampaignConfig::validate() const {
  if (query_budget < 0) throw ValidationError("query_budget must be >= 0");
  if (!(early_exit.fraction > 0.0 && early_exit.fraction <= 1.0)) {
    throw ValidationError("early-exit fraction must lie in (0, 1]");
  }
  if (early_exit.min_questions > early_exit.max_questions) {
    throw ValidationError("early-exit min must be <= max");
  }
  if (early_exit.min_questions < 1) {
    throw ValidationError("early-exit min must be >= 1");
  }
  if (!(warmup_fraction > 0.0 && warmup_fraction <= 1.0)) {
    throw ValidationError("warmup fraction must lie in (0, 1]");
  }
  if (worker_count < 1) throw ValidationError("worker_count must be >= 1");
  if (placeholder.empty()) throw ValidationError("placeholder must be non-empty");
  if (mutation_selector.smoothing_delta <= 0.0 ||
      template_selector.smoothing_delta <= 0.0) {
    throw ValidationError("smoothing delta must be > 0");
  }
}

int early_exit_threshold(int active_question_count,
                         const EarlyExitConfig& cfg) {
  if (active_question_count < 1) {
    throw std::invalid_argument("early_exit_threshold: no active questions");
  }
  int raw = static_cast<int>(
      std::ceil(cfg.fraction * static_cast<double>(active_question_count)));
  int clamped = std::clamp(raw, cfg.min_questions, cfg.max_questions);
  return std::min(clamped, active_question_count);
}

std::vector<int> CampaignState::children_of(int id) const {
  std::vector<int> out;
  for (int member : population) {
    if (registry[member].parent == id) out.push_back(member);
  }
  return out;
}

std::vector<int> CampaignState::active_questions(
    const CampaignConfig& cfg) const {
  if (cfg.upgrades.question_pruning) return unbroken;
  std::vector<int> all(questions.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return all;
}

double MctsSelector::uct(int id, int total_visits) const {
  auto it = nodes_.find(id);
  if (it == nodes_.end() || it->second.visits == 0) {
    return std::numeric_limits<double>::infinity();
  }
  const Node& n = it->second;
  return n.value / n.visits +
         explore_c_ * std::sqrt(std::log(static_cast<double>(total_visits) + 1.0) /
                                n.visits);
}

int MctsSelector::select(const CampaignState& state, Rng& rng) const {
  int total = 0;
  for (const auto& [id, node] : nodes_) total += node.visits;
  std::vector<int> level;
  for (int i = 0; i < state.seed_count; ++i) level.push_back(i);
  int chosen = level.front();
  for (;;) {
    double best = -std::numeric_limits<double>::infinity();
    for (int id : level) {
      double score = uct(id, total);
      if (score > best) {
        best = score;
        chosen = id;
      }
    }
    std::vector<int> next = state.children_of(chosen);
    if (next.empty()) return chosen;
    if (rng.next_double() < 0.5) return chosen;
    level = std::move(next);
  }
}

void MctsSelector::reward(const CampaignState& state, int template_id,
                          double r) {
  int id = template_id;
  for (;;) {
    Node& n = nodes_[id];
    n.visits += 1;
    n.value += r;
    const Template& t = state.tpl(id);
    if (!t.parent.has_value()) break;
    id = *t.parent;
  }
}

CampaignState init_campaign(const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& question_texts,
                            const CampaignConfig& cfg) {
  cfg.validate();
  if (seed_texts.empty()) throw ValidationError("seed set is empty");
  if (question_texts.empty()) throw ValidationError("question set is empty");
  CampaignState state;
  state.mutation_q = MutationQTable(cfg.mutation_selector);
  state.template_q = TemplateQTable(cfg.template_selector);
  state.rng = Rng(cfg.rng_seed);
  for (std::size_t i = 0; i < seed_texts.size(); ++i) {
    int id = static_cast<int>(i);
    validate_template_text(id, seed_texts[i], cfg.placeholder);
    Template seed;
    seed.id = id;
    seed.text = seed_texts[i];
    seed.root = id;
    state.registry.push_back(std::move(seed));
    state.population.push_back(id);
    state.template_q.ensure_entry(id);
  }
  state.seed_count = static_cast<int>(seed_texts.size());
  for (std::size_t i = 0; i < question_texts.size(); ++i) {
    Question q;
    q.id = static_cast<int>(i);
    q.text = question_texts[i];
    state.questions.push_back(std::move(q));
    state.unbroken.push_back(q.id);
  }
  return state;
}

namespace {

struct QueryOutcome {
  std::string prompt;
  std::string response;
  Verdict verdict = Verdict::Refusal;
};

bool kind_allowed(MutationKind kind, const CampaignConfig& cfg) {
  // An explicit restriction list overrides the upgrade flags entirely.
  if (cfg.restrict_kinds) {
    const auto& allowed = *cfg.restrict_kinds;
    return std::find(allowed.begin(), allowed.end(), kind) != allowed.end();
  }
  const UpgradeFlags& u = cfg.upgrades;
  switch (kind) {
    case MutationKind::RefusalSuppression: return u.refusal_suppression;
    case MutationKind::InjectPrefix: return u.inject_prefix;
    case MutationKind::ExpandAfter: return u.expand_after;
    case MutationKind::TransferMutation: return u.transfer_mutation;
    case MutationKind::FewShots: return u.few_shots;
    // Identity exists to make questions skipped by early exit reachable
    // again, so it travels with that upgrade.
    case MutationKind::Identity: return u.early_exit;
    default: return true;
  }
}

MutantContext make_context(CampaignState& state, const Template& t,
                           const CampaignConfig& cfg) {
  MutantContext ctx;
  ctx.registry = &state.registry;
  ctx.placeholder = cfg.placeholder;
  ctx.rng = &state.rng;
  std::vector<int> breakers;
  for (int id : state.population) {
    const Template& g = state.registry[id];
    if (!g.is_seed() && g.jailbreaks >= 1) breakers.push_back(id);
  }
  std::sort(breakers.begin(), breakers.end(), [&](int a, int b) {
    return template_rank_less(state.registry[a], state.registry[b]);
  });
  for (int id : breakers) {
    if (ctx.top_jailbreaking.size() < 10) ctx.top_jailbreaking.push_back(id);
    if (ctx.same_root_top.size() < 3 && state.registry[id].root == t.root) {
      ctx.same_root_top.push_back(id);
    }
  }
  for (int id : state.population) {
    if (id != t.id) ctx.crossover_pool.push_back(id);
  }
  return ctx;
}

void reward_selectors(CampaignState& state, const CampaignConfig& cfg,
                      const Template& t, std::optional<MutationKind> m,
                      double r) {
  if (m && cfg.upgrades.qlearning_mutation_selection) {
    state.mutation_q.reward(t, *m, r);
  }
  if (cfg.upgrades.mab_template_selection) {
    state.template_q.reward(t.id, r);
  } else {
    state.mcts.reward(state, t.id, r);
  }
}

bool should_stop(const CampaignState& state, const CampaignConfig& cfg) {
  if (state.consumed_queries >= cfg.query_budget) return true;
  if (cfg.upgrades.question_pruning && state.unbroken.empty()) {
    return true;  // nothing left to attack even if stop_on_all_broken is off
  }
  if (cfg.stop_on_all_broken) {
    bool all_broken = std::all_of(
        state.questions.begin(), state.questions.end(), [](const Question& q) {
          return q.status == QuestionStatus::Jailbroken;
        });
    if (all_broken) return true;
  }
  return false;
}

}  // namespace

IterationReport evaluate_mutant(int mutant_id,
                                const std::vector<int>& candidate_questions,
                                CampaignState& state,
                                const CampaignConfig& cfg, Clients& clients,
                                ThreadPool& pool, EventSink* sink) {
  IterationReport report;
  if (candidate_questions.empty()) return report;

  std::vector<int> order = candidate_questions;
  state.rng.shuffle(order);

  const bool exit_enabled = cfg.upgrades.early_exit;
  const int threshold =
      exit_enabled ? early_exit_threshold(static_cast<int>(order.size()),
                                          cfg.early_exit)
                   : static_cast<int>(order.size());
  const auto mode = cfg.early_exit.mode;

  int miss_run = 0;
  bool saw_jailbreak = false;
  std::size_t pos = 0;
  while (pos < order.size()) {
    const int budget_left = cfg.query_budget - state.consumed_queries;
    if (budget_left <= 0) break;

    std::size_t batch = std::min<std::size_t>(
        static_cast<std::size_t>(cfg.worker_count), order.size() - pos);
    batch = std::min(batch, static_cast<std::size_t>(budget_left));
    if (exit_enabled) {
      int room = threshold;
      if (mode == EarlyExitConfig::Mode::ConsecutiveMisses) {
        room = threshold - miss_run;
      } else if (!saw_jailbreak) {
        room = threshold - report.dispatched;
      } else {
        room = static_cast<int>(order.size());  // window passed, no cap
      }
      batch = std::min(batch, static_cast<std::size_t>(room));
    }

    std::vector<int> batch_qids(order.begin() + pos, order.begin() + pos + batch);
    auto outcomes = parallel_map(pool, batch, [&](std::size_t i) {
      const Question& q = state.questions[batch_qids[i]];
      QueryOutcome out;
      out.prompt = substitute(state.tpl(mutant_id), q, cfg.placeholder);
      ChatRequest req;
      req.user_message = out.prompt;
      req.temperature = cfg.target_temperature;
      req.max_tokens = cfg.target_max_tokens;
      try {
        out.response = clients.target->chat(req).text;
      } catch (const TransportError& e) {
        out.response = std::string("[transport-error] ") + e.what();
        out.verdict = Verdict::Refusal;
        return out;
      }
      try {
        out.verdict = clients.judge->classify(q.text, out.response);
      } catch (const TransportError&) {
        out.verdict = Verdict::Refusal;  // fail closed
      }
      return out;
    });

    // Merge in permutation order; removal from the unbroken set waits for
    // the batch boundary below.
    std::vector<int> broke_now;
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const QueryOutcome& out = outcomes[i];
      const int qid = batch_qids[i];
      state.consumed_queries += 1;
      AttackRecord rec;
      rec.template_id = mutant_id;
      rec.question_id = qid;
      rec.attack_prompt = out.prompt;
      rec.response = out.response;
      rec.verdict = out.verdict;
      rec.query_index = state.consumed_queries;
      state.records.push_back(rec);
      if (sink != nullptr) sink->on_attack(state.records.back());

      Template& mutant = state.registry[mutant_id];
      mutant.attempts += 1;
      report.dispatched += 1;
      if (out.verdict == Verdict::Jailbreak) {
        mutant.jailbreaks += 1;
        report.jailbroken_questions.push_back(qid);
        broke_now.push_back(qid);
        miss_run = 0;
        saw_jailbreak = true;
        Question& q = state.questions[qid];
        if (q.status == QuestionStatus::Unbroken) {
          q.status = QuestionStatus::Jailbroken;
          q.broken_by = BrokenBy{mutant_id, rec.query_index};
        }
      } else {
        miss_run += 1;
      }
    }
    pos += batch;

    if (!broke_now.empty()) {
      std::erase_if(state.unbroken, [&](int qid) {
        return std::find(broke_now.begin(), broke_now.end(), qid) !=
               broke_now.end();
      });
    }

    if (exit_enabled && pos < order.size()) {
      const bool trigger =
          mode == EarlyExitConfig::Mode::ConsecutiveMisses
              ? miss_run >= threshold
              : (!saw_jailbreak && report.dispatched >= threshold);
      if (trigger) {
        report.fruitless = true;
        break;
      }
    }
  }
  return report;
}

void warmup(CampaignState& state, const CampaignConfig& cfg, Clients& clients,
            ThreadPool& pool, EventSink* sink) {
  std::vector<int> subset;
  subset.reserve(state.questions.size());
  for (const Question& q : state.questions) subset.push_back(q.id);
  if (cfg.warmup_fraction < 1.0) {
    state.rng.shuffle(subset);
    auto take = static_cast<std::size_t>(std::ceil(
        cfg.warmup_fraction * static_cast<double>(state.questions.size())));
    subset.resize(std::max<std::size_t>(take, 1));
    std::sort(subset.begin(), subset.end());
  }

  for (int seed_id = 0; seed_id < state.seed_count; ++seed_id) {
    if (state.consumed_queries >= cfg.query_budget) break;
    std::vector<int> candidates;
    for (int qid : subset) {
      const bool active = !cfg.upgrades.question_pruning ||
                          std::find(state.unbroken.begin(),
                                    state.unbroken.end(),
                                    qid) != state.unbroken.end();
      if (active) candidates.push_back(qid);
    }
    if (candidates.empty()) break;

    IterationReport rep =
        evaluate_mutant(seed_id, candidates, state, cfg, clients, pool, sink);
    const double reward =
        rep.dispatched > 0
            ? static_cast<double>(rep.jailbroken_questions.size()) /
                  rep.dispatched
            : 0.0;
    reward_selectors(state, cfg, state.tpl(seed_id), MutationKind::Identity,
                     reward);

    if (sink != nullptr) {
      IterationEvent ev;
      ev.warmup = true;
      ev.selected_template = seed_id;
      ev.mutant_id = seed_id;
      ev.dispatched = rep.dispatched;
      ev.jailbreaks = static_cast<int>(rep.jailbroken_questions.size());
      ev.fruitless = rep.fruitless;
      ev.accepted = true;  // seeds are population members by definition
      ev.reward = reward;
      ev.total_queries = state.consumed_queries;
      sink->on_iteration(ev);
    }
  }
}

CampaignResult run_campaign(const std::vector<std::string>& seed_texts,
                            const std::vector<std::string>& question_texts,
                            const CampaignConfig& cfg, Clients& clients,
                            const PromptLibrary& lib, EventSink* sink) {
  CampaignState state = init_campaign(seed_texts, question_texts, cfg);
  ThreadPool pool(cfg.worker_count);

  if (cfg.upgrades.warmup) warmup(state, cfg, clients, pool, sink);

  // Invalid-mutant iterations consume no budget, so a mutator that never
  // produces usable output would spin forever without this cap.
  constexpr int kMaxConsecutiveInvalid = 250;
  int consecutive_invalid = 0;

  while (!should_stop(state, cfg)) {
    state.iteration += 1;

    const int template_id =
        cfg.upgrades.mab_template_selection
            ? state.template_q.select(state.population, state.rng)
            : state.mcts.select(state, state.rng);
    // Copy: the registry may grow (and reallocate) inside this iteration.
    const Template selected = state.tpl(template_id);

    MutantContext ctx = make_context(state, selected, cfg);
    std::vector<MutationKind> compatible =
        compatible_mutations(selected, ctx, lib);
    std::erase_if(compatible,
                  [&](MutationKind k) { return !kind_allowed(k, cfg); });
    if (compatible.empty()) {
      throw std::logic_error(
          "no compatible mutation for template " + std::to_string(template_id) +
          "; ablation flags too restrictive");
    }

    const MutationKind mutation =
        cfg.upgrades.qlearning_mutation_selection
            ? state.mutation_q.select(selected, compatible, state.rng)
            : compatible[state.rng.uniform_index(compatible.size())];
    state.mutation_usage[mutation].selected += 1;

    std::optional<std::string> mutant_text;
    if (is_static_mutation(mutation)) {
      mutant_text = apply_static(mutation, selected,
                                 static_cast<int>(state.registry.size()), ctx,
                                 lib)
                        .text;
    } else {
      ChatRequest req;
      req.user_message = build_mutator_prompt(mutation, selected, ctx, lib);
      req.temperature = cfg.mutator_temperature;
      req.max_tokens = cfg.mutator_max_tokens;
      try {
        const std::string raw = clients.mutator->chat(req).text;
        MutantParseResult parsed =
            parse_mutator_response(raw, cfg.placeholder, lib);
        if (parsed.ok()) {
          mutant_text = std::move(parsed.text);
        }
      } catch (const TransportError&) {
        // retries exhausted: treated the same as an invalid mutant
      }
    }

    if (!mutant_text.has_value()) {
      state.mutation_usage[mutation].invalid += 1;
      reward_selectors(state, cfg, selected, mutation, 0.0);
      state.mutation_q.params().epsilon.decay();
      state.template_q.params().epsilon.decay();
      if (sink != nullptr) {
        IterationEvent ev;
        ev.iteration = state.iteration;
        ev.selected_template = template_id;
        ev.mutation = mutation;
        ev.mutant_valid = false;
        ev.total_queries = state.consumed_queries;
        sink->on_iteration(ev);
      }
      if (++consecutive_invalid >= kMaxConsecutiveInvalid) {
        throw TransportError(
            "mutator produced " + std::to_string(consecutive_invalid) +
            " consecutive invalid mutants; aborting campaign");
      }
      continue;
    }
    consecutive_invalid = 0;

    Template mutant;
    mutant.id = static_cast<int>(state.registry.size());
    mutant.text = std::move(*mutant_text);
    mutant.parent = selected.id;
    mutant.root = selected.root;
    mutant.mutation_applied = mutation;
    state.registry.push_back(std::move(mutant));
    const int mutant_id = state.registry.back().id;

    IterationReport rep =
        evaluate_mutant(mutant_id, state.active_questions(cfg), state, cfg,
                        clients, pool, sink);

    const double reward =
        rep.dispatched > 0
            ? static_cast<double>(rep.jailbroken_questions.size()) /
                  rep.dispatched
            : 0.0;
    const bool accepted = !rep.jailbroken_questions.empty();
    if (accepted) {
      state.population.push_back(mutant_id);
      state.template_q.ensure_entry(mutant_id);
      state.mutation_usage[mutation].accepted += 1;
    }
    state.mutation_usage[mutation].reward_sum += reward;
    reward_selectors(state, cfg, selected, mutation, reward);
    state.mutation_q.params().epsilon.decay();
    state.template_q.params().epsilon.decay();

    if (sink != nullptr) {
      IterationEvent ev;
      ev.iteration = state.iteration;
      ev.selected_template = template_id;
      ev.mutation = mutation;
      ev.mutant_id = mutant_id;
      ev.dispatched = rep.dispatched;
      ev.jailbreaks = static_cast<int>(rep.jailbroken_questions.size());
      ev.fruitless = rep.fruitless;
      ev.accepted = accepted;
      ev.reward = reward;
      ev.total_queries = state.consumed_queries;
      sink->on_iteration(ev);
    }
  }

  CampaignMetrics metrics = compute_metrics(
      state.records, static_cast<int>(state.questions.size()));
  return CampaignResult{std::move(state), metrics};
}

}  // namespace pfuzz
