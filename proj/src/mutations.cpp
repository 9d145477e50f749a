#include "pfuzz/mutations.hpp"

#include <algorithm>
#include <cctype>

namespace pfuzz {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

Template make_child(const Template& parent, int new_id, MutationKind kind,
                    std::string text) {
  Template child;
  child.id = new_id;
  child.text = std::move(text);
  child.parent = parent.id;
  child.root = parent.root;
  child.mutation_applied = kind;
  return child;
}

}  // namespace

bool ends_with_ignoring_trailing_space(const std::string& text,
                                       const std::string& suffix) {
  std::size_t end = text.size();
  while (end > 0 && std::isspace(static_cast<unsigned char>(text[end - 1]))) {
    --end;
  }
  if (end < suffix.size()) return false;
  return text.compare(end - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<MutationKind> compatible_mutations(const Template& t,
                                               const MutantContext& ctx,
                                               const PromptLibrary& lib) {
  const bool has_prefix =
      ends_with_ignoring_trailing_space(t.text, lib.inject_prefix());
  const bool has_block =
      t.text.find(lib.refusal_sentinel()) != std::string::npos;

  std::vector<MutationKind> out;
  for (MutationKind kind : all_mutation_kinds()) {
    switch (kind) {
      case MutationKind::InjectPrefix:
      case MutationKind::ExpandAfter:
        if (has_prefix) continue;
        break;
      case MutationKind::RefusalSuppression:
        if (has_block) continue;
        break;
      case MutationKind::TransferMutation:
        if (ctx.top_jailbreaking.empty()) continue;
        break;
      case MutationKind::FewShots:
        if (ctx.same_root_top.empty()) continue;
        break;
      case MutationKind::Crossover:
        if (ctx.crossover_pool.empty()) continue;
        break;
      default:
        break;
    }
    out.push_back(kind);
  }
  return out;
}

Template apply_static(MutationKind kind, const Template& t, int new_id,
                      const MutantContext& ctx, const PromptLibrary& lib) {
  if (!is_static_mutation(kind)) {
    throw ValidationError(std::string("apply_static: ") + to_string(kind) +
                          " is model-backed");
  }
  auto compat = compatible_mutations(t, ctx, lib);
  if (std::find(compat.begin(), compat.end(), kind) == compat.end()) {
    throw ValidationError(std::string("apply_static: ") + to_string(kind) +
                          " incompatible with template " + std::to_string(t.id));
  }
  switch (kind) {
    case MutationKind::Identity:
      return make_child(t, new_id, kind, t.text);
    case MutationKind::InjectPrefix:
      return make_child(t, new_id, kind, t.text + "\n" + lib.inject_prefix());
    case MutationKind::RefusalSuppression:
      return make_child(
          t, new_id, kind,
          fill_named_placeholders(lib.refusal_block(), {{"TEMPLATE", t.text}}));
    default:
      throw std::logic_error("unreachable");
  }
}

std::string build_mutator_prompt(MutationKind kind, const Template& t,
                                 const MutantContext& ctx,
                                 const PromptLibrary& lib) {
  if (is_static_mutation(kind)) {
    throw ValidationError(std::string("build_mutator_prompt: ") +
                          to_string(kind) + " is static");
  }
  std::unordered_map<std::string, std::string> values = {
      {"TEMPLATE", t.text},
      {"PLACEHOLDER", ctx.placeholder},
  };
  switch (kind) {
    case MutationKind::TransferMutation: {
      if (ctx.top_jailbreaking.empty()) {
        throw ValidationError("TransferMutation: empty example pool");
      }
      int pick = ctx.top_jailbreaking[ctx.rng->uniform_index(
          ctx.top_jailbreaking.size())];
      const Template& mutant = ctx.lookup(pick);
      const Template& origin = ctx.lookup(mutant.root);
      values["EXAMPLE_ORIGINAL"] = origin.text;
      values["EXAMPLE_MUTANT"] = mutant.text;
      break;
    }
    case MutationKind::FewShots: {
      if (ctx.same_root_top.empty()) {
        throw ValidationError("FewShots: empty example pool");
      }
      std::string examples;
      int n = 0;
      for (int id : ctx.same_root_top) {
        if (n == 3) break;
        ++n;
        examples += "[EXAMPLE " + std::to_string(n) + " BEGINS]\n" +
                    ctx.lookup(id).text + "\n[EXAMPLE " + std::to_string(n) +
                    " ENDS]\n\n";
      }
      if (!examples.empty()) examples.resize(examples.size() - 2);
      values["EXAMPLES"] = examples;
      break;
    }
    case MutationKind::Crossover: {
      if (ctx.crossover_pool.empty()) {
        throw ValidationError("Crossover: empty partner pool");
      }
      int pick =
          ctx.crossover_pool[ctx.rng->uniform_index(ctx.crossover_pool.size())];
      values["SECOND_TEMPLATE"] = ctx.lookup(pick).text;
      break;
    }
    default:
      break;
  }
  return fill_named_placeholders(lib.mutation_prompt(kind), values);
}

MutantParseResult parse_mutator_response(const std::string& raw,
                                         const std::string& placeholder,
                                         const PromptLibrary& lib) {
  MutantParseResult result;
  std::size_t begin = raw.find(lib.answer_begin_tag());
  if (begin == std::string::npos) {
    result.error = "missing " + lib.answer_begin_tag() + " tag";
    return result;
  }
  begin += lib.answer_begin_tag().size();
  std::size_t end = raw.rfind(lib.answer_end_tag());
  if (end == std::string::npos || end < begin) {
    result.error = "missing " + lib.answer_end_tag() + " tag";
    return result;
  }
  std::string text = trim(raw.substr(begin, end - begin));
  int n = count_placeholder(text, placeholder);
  if (n != 1) {
    result.error = "expected exactly one placeholder, found " +
                   std::to_string(n);
    return result;
  }
  result.text = std::move(text);
  return result;
}

}  // namespace pfuzz
