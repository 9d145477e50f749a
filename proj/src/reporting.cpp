#include "pfuzz/reporting.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace pfuzz {

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string redacted(const std::string& body) {
  return "digest:" + fnv1a_hex(body);
}

nlohmann::json template_json(const Template& t, bool accepted) {
  nlohmann::json j;
  j["v"] = 1;
  j["id"] = t.id;
  j["text"] = t.text;
  if (t.parent) {
    j["parent"] = *t.parent;
  } else {
    j["parent"] = nullptr;
  }
  j["root"] = t.root;
  if (t.mutation_applied) {
    j["mutation"] = to_string(*t.mutation_applied);
  } else {
    j["mutation"] = nullptr;
  }
  j["attempts"] = t.attempts;
  j["jailbreaks"] = t.jailbreaks;
  j["asr_percent"] =
      t.attempts > 0 ? 100.0 * t.jailbreaks / t.attempts : 0.0;
  j["accepted"] = accepted;
  return j;
}

}  // namespace

std::string attack_record_json(const AttackRecord& record, bool redact) {
  nlohmann::json j;
  j["v"] = 1;
  j["query_index"] = record.query_index;
  j["template_id"] = record.template_id;
  j["question_id"] = record.question_id;
  j["prompt"] = record.attack_prompt;
  j["response"] = redact ? redacted(record.response) : record.response;
  j["verdict"] = to_string(record.verdict);
  return j.dump();
}

void write_attack_log(std::span<const AttackRecord> records,
                      const std::filesystem::path& file,
                      const ReportOptions& options) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write attack log: " + file.string());
  for (const AttackRecord& rec : records) {
    out << attack_record_json(rec, options.redact_responses) << "\n";
  }
}

AttackLogWriter::AttackLogWriter(const std::filesystem::path& file,
                                 const ReportOptions& options)
    : stream_(file, std::ios::binary), options_(options) {
  if (!stream_) {
    throw ValidationError("cannot open attack log: " + file.string());
  }
}

void AttackLogWriter::on_attack(const AttackRecord& record) {
  stream_ << attack_record_json(record, options_.redact_responses) << "\n";
  stream_.flush();
  ++written_;
}

CampaignReport build_report(const CampaignState& state,
                            const CampaignMetrics& metrics) {
  CampaignReport report;
  report.metrics = metrics;
  report.templates = state.registry;
  report.accepted.assign(state.registry.size(), false);
  for (int id : state.population) report.accepted[id] = true;
  report.seed_count = state.seed_count;
  report.mutation_usage = state.mutation_usage;
  report.mutation_q_entries = state.mutation_q.entries();
  report.template_q_entries = state.template_q.entries();
  report.epsilon_mutation = state.mutation_q.params().epsilon.current;
  report.epsilon_template = state.template_q.params().epsilon.current;
  report.iterations = state.iteration;
  for (const AttackRecord& rec : state.records) {
    if (rec.verdict == Verdict::Jailbreak) {
      report.jailbreak_artifacts.push_back(rec);
    }
  }
  return report;
}

void persist_report(const CampaignReport& report, const CampaignConfig& cfg,
                    const std::filesystem::path& out_dir,
                    const ReportOptions& options) {
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream out(out_dir / "templates.jsonl", std::ios::binary);
    if (!out) throw ValidationError("cannot write templates.jsonl");
    for (std::size_t i = 0; i < report.templates.size(); ++i) {
      out << template_json(report.templates[i], report.accepted[i]).dump()
          << "\n";
    }
  }

  {
    std::ofstream out(out_dir / "qtables.txt", std::ios::binary);
    if (!out) throw ValidationError("cannot write qtables.txt");
    out << "# q-table dump, format-version 1\n";
    out << "epsilon mutation " << report.epsilon_mutation << "\n";
    out << "epsilon template " << report.epsilon_template << "\n";
    for (const auto& [key, value] : report.mutation_q_entries) {
      out << "mutation " << key.first << " "
          << to_string(static_cast<MutationKind>(key.second)) << " " << value
          << "\n";
    }
    for (const auto& [id, value] : report.template_q_entries) {
      out << "template " << id << " " << value << "\n";
    }
  }

  nlohmann::json summary;
  summary["format_version"] = 1;
  summary["metrics"] = {
      {"asr_percent", report.metrics.asr_percent},
      {"total_queries", report.metrics.total_queries},
      {"jailbroken_questions", report.metrics.jailbroken_question_count},
      {"jailbreaking_templates", report.metrics.jailbreaking_template_count},
  };
  if (report.metrics.avg_queries_per_jailbreak) {
    summary["metrics"]["avg_queries_per_jailbreak"] =
        *report.metrics.avg_queries_per_jailbreak;
  } else {
    summary["metrics"]["avg_queries_per_jailbreak"] = "n/a";
  }
  summary["iterations"] = report.iterations;
  summary["seed_count"] = report.seed_count;
  summary["config"] = {
      {"query_budget", cfg.query_budget},
      {"rng_seed", cfg.rng_seed},
      {"worker_count", cfg.worker_count},
      {"warmup_fraction", cfg.warmup_fraction},
      {"placeholder", cfg.placeholder},
      {"early_exit",
       {{"fraction", cfg.early_exit.fraction},
        {"min", cfg.early_exit.min_questions},
        {"max", cfg.early_exit.max_questions},
        {"mode", cfg.early_exit.mode == EarlyExitConfig::Mode::ConsecutiveMisses
                     ? "consecutive-misses"
                     : "first-window-only"}}},
      {"upgrades",
       {{"refusal_suppression", cfg.upgrades.refusal_suppression},
        {"inject_prefix", cfg.upgrades.inject_prefix},
        {"expand_after", cfg.upgrades.expand_after},
        {"transfer_mutation", cfg.upgrades.transfer_mutation},
        {"few_shots", cfg.upgrades.few_shots},
        {"qlearning_mutation_selection",
         cfg.upgrades.qlearning_mutation_selection},
        {"mab_template_selection", cfg.upgrades.mab_template_selection},
        {"early_exit", cfg.upgrades.early_exit},
        {"warmup", cfg.upgrades.warmup},
        {"question_pruning", cfg.upgrades.question_pruning}}},
      {"mutation_selector",
       {{"alpha", cfg.mutation_selector.alpha},
        {"gamma", cfg.mutation_selector.gamma},
        {"delta", cfg.mutation_selector.smoothing_delta},
        {"epsilon_initial", cfg.mutation_selector.epsilon.initial},
        {"epsilon_decay", cfg.mutation_selector.epsilon.decay_factor},
        {"epsilon_min", cfg.mutation_selector.epsilon.minimum}}},
      {"template_selector",
       {{"alpha", cfg.template_selector.alpha},
        {"gamma", cfg.template_selector.gamma},
        {"delta", cfg.template_selector.smoothing_delta},
        {"epsilon_initial", cfg.template_selector.epsilon.initial},
        {"epsilon_decay", cfg.template_selector.epsilon.decay_factor},
        {"epsilon_min", cfg.template_selector.epsilon.minimum}}},
  };
  summary["mutation_usage"] = nlohmann::json::object();
  for (const auto& [kind, usage] : report.mutation_usage) {
    summary["mutation_usage"][to_string(kind)] = {
        {"selected", usage.selected},
        {"invalid", usage.invalid},
        {"accepted", usage.accepted},
        {"reward_sum", usage.reward_sum}};
  }
  summary["jailbreak_artifacts"] = nlohmann::json::array();
  for (const AttackRecord& rec : report.jailbreak_artifacts) {
    summary["jailbreak_artifacts"].push_back(
        {{"query_index", rec.query_index},
         {"template_id", rec.template_id},
         {"question_id", rec.question_id},
         {"prompt", rec.attack_prompt},
         {"response", options.redact_responses ? redacted(rec.response)
                                               : rec.response}});
  }

  // temp-write then rename; a failure mid-write must not leave a truncated
  // summary.json behind
  const auto tmp = out_dir / "summary.json.tmp";
  try {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ValidationError("cannot write summary.json");
    out << summary.dump(2) << "\n";
    out.close();
    if (!out) throw ValidationError("failed flushing summary.json");
    std::filesystem::rename(tmp, out_dir / "summary.json");
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  while (i < content.size()) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else if (c != '\r') {
      field += c;
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string read_whole_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::vector<std::string> load_text_records(const std::filesystem::path& file) {
  std::vector<std::string> out;
  if (file.extension() == ".csv") {
    auto rows = parse_csv(read_whole_file(file));
    if (rows.empty()) throw ValidationError(file.string() + ": empty csv");
    const auto& header = rows.front();
    auto col = std::find(header.begin(), header.end(), "text");
    if (col == header.end()) {
      throw ValidationError(file.string() + ":1: no \"text\" column in header");
    }
    std::size_t idx = static_cast<std::size_t>(col - header.begin());
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() <= idx) {
        throw ValidationError(file.string() + ":" + std::to_string(r + 1) +
                              ": row has no text field");
      }
      out.push_back(rows[r][idx]);
    }
    return out;
  }

  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + file.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      out.push_back(j.at("text").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return out;
}

std::vector<Template> load_template_set(const std::filesystem::path& file) {
  std::vector<Template> out;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ValidationError("cannot read " + file.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      nlohmann::json j = nlohmann::json::parse(line);
      Template t;
      t.id = j.value("id", static_cast<int>(out.size()));
      t.text = j.at("text").get<std::string>();
      if (j.contains("parent") && !j["parent"].is_null()) {
        t.parent = j["parent"].get<int>();
      }
      t.root = j.value("root", t.id);
      if (j.contains("mutation") && !j["mutation"].is_null()) {
        t.mutation_applied =
            mutation_kind_from_string(j["mutation"].get<std::string>());
      }
      t.attempts = j.value("attempts", 0);
      t.jailbreaks = j.value("jailbreaks", 0);
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(file.string() + ":" + std::to_string(line_no) +
                            ": " + e.what());
    }
  }
  return out;
}

double EvaluateResult::top_k_asr(int k) const {
  int question_count = static_cast<int>(queries_per_question.size());
  if (question_count == 0) return 0.0;
  int broken = 0;
  for (const auto& [qid, rank] : first_break_rank) {
    if (rank < k) ++broken;
  }
  return 100.0 * broken / question_count;
}

EvaluateResult run_evaluate(std::vector<Template> templates,
                            const std::vector<std::string>& question_texts,
                            ChatClient& target, JudgeClient& judge,
                            const std::string& placeholder, EventSink* sink) {
  if (templates.empty()) throw ValidationError("evaluate: no templates");
  if (question_texts.empty()) throw ValidationError("evaluate: no questions");
  EvaluateResult result;
  result.ranked = rank_templates(std::move(templates));
  for (const Template& t : result.ranked) {
    validate_template_text(t.id, t.text, placeholder);
  }

  int query_index = 0;
  for (std::size_t qi = 0; qi < question_texts.size(); ++qi) {
    Question q;
    q.id = static_cast<int>(qi);
    q.text = question_texts[qi];
    int used = 0;
    for (std::size_t rank = 0; rank < result.ranked.size(); ++rank) {
      const Template& t = result.ranked[rank];
      AttackRecord rec;
      rec.template_id = t.id;
      rec.question_id = q.id;
      rec.attack_prompt = substitute(t, q, placeholder);
      ChatRequest req;
      req.user_message = rec.attack_prompt;
      try {
        rec.response = target.chat(req).text;
        rec.verdict = judge.classify(q.text, rec.response);
      } catch (const TransportError& e) {
        rec.response = std::string("[transport-error] ") + e.what();
        rec.verdict = Verdict::Refusal;
      }
      rec.query_index = ++query_index;
      ++used;
      result.records.push_back(rec);
      if (sink != nullptr) sink->on_attack(result.records.back());
      if (rec.verdict == Verdict::Jailbreak) {
        result.first_break_rank[q.id] = static_cast<int>(rank);
        break;  // per-question pruning: first jailbreak ends this question
      }
    }
    result.queries_per_question[q.id] = used;
  }
  result.metrics = compute_metrics(result.records,
                                   static_cast<int>(question_texts.size()));
  return result;
}

}  // namespace pfuzz
