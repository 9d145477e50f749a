#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "pfuzz/core.hpp"

namespace pfuzz {

// Single-turn request: one user message, no history (threat model is
// black-box access via user prompts only).
struct ChatRequest {
  std::string user_message;
  double temperature = 1.0;
  int max_tokens = 512;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason = "stop";
  double latency_ms = 0.0;
};

// Raised after retries are exhausted or on unrecoverable client errors.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Target and mutator roles share this interface. Implementations must
// tolerate concurrent calls up to the campaign worker count.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse chat(const ChatRequest& request) = 0;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  virtual Verdict classify(const std::string& question,
                           const std::string& response) = 0;
};

struct RetryPolicy {
  int max_attempts = 4;
  int base_delay_ms = 250;
  int max_delay_ms = 4000;
};

}  // namespace pfuzz
