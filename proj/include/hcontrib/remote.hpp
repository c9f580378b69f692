#pragma once

// Echo scoring against an OpenAI-compatible completions endpoint:
// POST {base_url}/v1/completions with max_tokens = 0, echo = true and
// logprobs = 0 returns per-token logprobs of the prompt itself. The target's
// token span is cut out of the echoed prompt.

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hcontrib/scorer.hpp"

namespace hcontrib {

inline constexpr std::string_view kPromptSeparator = "\n\n";
inline constexpr std::string_view kApiKeyEnv = "HC_API_KEY";

struct EndpointConfig {
  std::string base_url;
  std::string model_name;
  std::optional<std::string> api_key;
  std::size_t max_concurrency = 4;
  std::chrono::milliseconds timeout{60'000};
  std::size_t max_retries = 3;
  std::string null_context;
  std::chrono::milliseconds retry_base_delay{500};
  /// Receives request and response bodies (secrets redacted) when set.
  std::function<void(std::string_view)> debug_log;
};

void validate(const EndpointConfig& cfg);

/// The configured unconditional preamble, verbatim.
std::string null_context_prompt(const EndpointConfig& cfg);

struct HttpResponse {
  int status = 0;  // 0: the request never produced an HTTP response
  std::string body;
  std::string error;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) = 0;
};

/// cpp-httplib backed transport; one connection per request.
std::shared_ptr<Transport> make_http_transport(std::chrono::milliseconds timeout);

struct TokenRange {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive
  friend bool operator==(const TokenRange&, const TokenRange&) = default;
};

/// Maximal contiguous token range covering exactly the characters [start, end).
/// Throws InvalidRange for an empty range and SpanAlignment when a token
/// straddles either boundary.
TokenRange locate_span(const std::vector<std::size_t>& token_offsets, const std::vector<std::string>& tokens,
                       std::size_t start, std::size_t end);

class RemoteScorer final : public Scorer {
 public:
  explicit RemoteScorer(EndpointConfig cfg, std::shared_ptr<Transport> transport = nullptr);

  TokenScores score(const ScoringRequest& request) const override;
  std::string id() const override { return cfg_.model_name; }
  std::string null_context() const override { return cfg_.null_context; }
  std::size_t max_concurrency() const override { return cfg_.max_concurrency; }

  const EndpointConfig& config() const noexcept { return cfg_; }

  /// Prompt prefix placed before the target; empty for an unconditional
  /// request with an empty null context.
  std::string prefix_for(const ScoringRequest& request) const;

 private:
  TokenScores score_once(const ScoringRequest& request, const std::string& prefix) const;
  std::string post_with_retries(const std::string& body) const;
  std::string redact(std::string text) const;
  void log(std::string_view what, const std::string& text) const;

  EndpointConfig cfg_;
  std::shared_ptr<Transport> transport_;
  std::string url_;
  std::optional<std::string> api_key_;
  mutable std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

}  // namespace hcontrib
