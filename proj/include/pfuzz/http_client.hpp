#pragma once

#include <optional>
#include <string>

#include "pfuzz/clients.hpp"
#include "pfuzz/prompts.hpp"

namespace pfuzz {

// Chat-completions wire configuration for one model role. Credentials come
// from environment variables only; endpoint and model id may also be set by
// CLI flags.
struct HttpClientConfig {
  std::string endpoint;  // e.g. https://api.example.com/v1/chat/completions
  std::string model;
  std::string api_key;
  RetryPolicy retry;
  int timeout_seconds = 120;
};

// Reads PFUZZ_<ROLE>_ENDPOINT / PFUZZ_<ROLE>_API_KEY / PFUZZ_<ROLE>_MODEL
// for role in {TARGET, MUTATOR, JUDGE}.
HttpClientConfig http_config_from_env(const std::string& role);

// OpenAI-compatible chat completions client: POST {model, messages:[{role:
// "user", content}], temperature, max_tokens}, answer read from
// choices[0].message.content. Transient failures (connect errors, 429, 5xx)
// are retried with exponential backoff; exhaustion throws TransportError.
class HttpChatClient : public ChatClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);
  ChatResponse chat(const ChatRequest& request) override;

 private:
  HttpClientConfig config_;
  std::string scheme_host_;
  std::string path_;
};

// Judge backed by a chat model: fills the judge prompt with question and
// response, sends it through an HttpChatClient and maps an answer starting
// with "yes" to Jailbreak. Transport failures yield the configured
// fail-closed verdict.
class HttpJudgeClient : public JudgeClient {
 public:
  HttpJudgeClient(HttpClientConfig config, const PromptLibrary& lib,
                  Verdict failure_verdict = Verdict::Refusal);
  Verdict classify(const std::string& question,
                   const std::string& response) override;

 private:
  HttpChatClient client_;
  const PromptLibrary* lib_;
  Verdict failure_verdict_;
};

}  // namespace pfuzz
