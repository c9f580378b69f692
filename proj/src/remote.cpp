#include "hcontrib/remote.hpp"

#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "hcontrib/error.hpp"

namespace hcontrib {

using nlohmann::json;

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorKind::InvalidArgument, "not an absolute URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport final : public Transport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers) override {
    const auto parts = split_url(url);
    httplib::Client client(parts.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(parts.path, h, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }

 private:
  std::chrono::milliseconds timeout_;
};

// Byte offsets for code-point offsets into a UTF-8 string.
std::vector<std::size_t> codepoint_to_byte_offsets(const std::string& text, const std::vector<std::size_t>& cps) {
  std::vector<std::size_t> starts;  // byte offset of each code point, plus end
  for (std::size_t i = 0; i < text.size(); ++i) {
    if ((static_cast<unsigned char>(text[i]) & 0xC0) != 0x80) starts.push_back(i);
  }
  starts.push_back(text.size());
  std::vector<std::size_t> out;
  out.reserve(cps.size());
  for (std::size_t cp : cps) out.push_back(cp < starts.size() ? starts[cp] : text.size() + cp);
  return out;
}

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

}  // namespace

void validate(const EndpointConfig& cfg) {
  if (cfg.base_url.rfind("http://", 0) != 0 && cfg.base_url.rfind("https://", 0) != 0) {
    throw Error(ErrorKind::InvalidArgument, "base_url must be an absolute http(s) URL: '" + cfg.base_url + "'");
  }
  if (cfg.max_concurrency < 1 || cfg.max_concurrency > 1024) {
    throw Error(ErrorKind::InvalidArgument, "max_concurrency must lie in [1, 1024]");
  }
  if (cfg.model_name.empty()) throw Error(ErrorKind::InvalidArgument, "model_name is empty");
}

std::string null_context_prompt(const EndpointConfig& cfg) { return cfg.null_context; }

std::shared_ptr<Transport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

TokenRange locate_span(const std::vector<std::size_t>& token_offsets, const std::vector<std::string>& tokens,
                       std::size_t start, std::size_t end) {
  if (end <= start) throw Error(ErrorKind::InvalidRange, "empty target range");
  if (token_offsets.size() != tokens.size()) {
    throw Error(ErrorKind::InvalidArgument, "offsets and tokens differ in length");
  }
  std::size_t first = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::size_t tok_end = token_offsets[i] + tokens[i].size();
    if (token_offsets[i] == start && !tokens[i].empty()) {
      first = i;
      break;
    }
    if (token_offsets[i] < start && tok_end > start) {
      throw Error(ErrorKind::SpanAlignment, "token " + std::to_string(i) + " straddles the target start");
    }
    if (token_offsets[i] > start) break;
  }
  if (first == tokens.size()) throw Error(ErrorKind::SpanAlignment, "no token begins at the target start");

  std::size_t pos = start;
  std::size_t i = first;
  for (; i < tokens.size() && pos < end; ++i) {
    if (token_offsets[i] != pos) {
      throw Error(ErrorKind::SpanAlignment, "tokens do not tile the target at token " + std::to_string(i));
    }
    pos += tokens[i].size();
  }
  if (pos != end) throw Error(ErrorKind::SpanAlignment, "a token straddles the target end");
  return {first, i};
}

RemoteScorer::RemoteScorer(EndpointConfig cfg, std::shared_ptr<Transport> transport)
    : cfg_(std::move(cfg)), transport_(std::move(transport)) {
  validate(cfg_);
  if (!transport_) transport_ = make_http_transport(cfg_.timeout);
  std::string base = cfg_.base_url;
  while (!base.empty() && base.back() == '/') base.pop_back();
  url_ = base + "/v1/completions";
  api_key_ = cfg_.api_key;
  if (const char* env = std::getenv(std::string(kApiKeyEnv).c_str()); env != nullptr && *env != '\0') {
    api_key_ = env;
  }
  slots_ = std::make_unique<std::counting_semaphore<1024>>(static_cast<std::ptrdiff_t>(cfg_.max_concurrency));
}

std::string RemoteScorer::prefix_for(const ScoringRequest& request) const {
  if (request.context) return *request.context + std::string(kPromptSeparator);
  if (cfg_.null_context.empty()) return {};
  return cfg_.null_context + std::string(kPromptSeparator);
}

std::string RemoteScorer::redact(std::string text) const {
  if (!api_key_ || api_key_->empty()) return text;
  for (std::size_t pos = text.find(*api_key_); pos != std::string::npos; pos = text.find(*api_key_, pos)) {
    text.replace(pos, api_key_->size(), "[REDACTED]");
  }
  return text;
}

void RemoteScorer::log(std::string_view what, const std::string& text) const {
  if (cfg_.debug_log) cfg_.debug_log(std::string(what) + ": " + redact(text));
}

std::string RemoteScorer::post_with_retries(const std::string& body) const {
  Headers headers{{"Content-Type", "application/json"}};
  if (api_key_ && !api_key_->empty()) headers.emplace_back("Authorization", "Bearer " + *api_key_);

  thread_local std::mt19937_64 jitter_rng{std::random_device{}()};
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::uniform_real_distribution<double> jitter(0.5, 1.5);
      const double scale = std::pow(2.0, static_cast<double>(attempt - 1)) * jitter(jitter_rng);
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(
          static_cast<double>(cfg_.retry_base_delay.count()) * scale));
    }
    log("request", body);
    HttpResponse res;
    {
      slots_->acquire();
      try {
        res = transport_->post(url_, body, headers);
      } catch (...) {
        slots_->release();
        throw;
      }
      slots_->release();
    }
    log("response " + std::to_string(res.status), res.body.empty() ? res.error : res.body);
    if (res.status >= 200 && res.status < 300) return res.body;
    last_error = res.status == 0 ? "transport error: " + res.error
                                 : "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300);
    if (!retryable(res.status)) {
      if (res.body.find("echo") != std::string::npos || res.body.find("logprobs") != std::string::npos) {
        throw Error(ErrorKind::UnsupportedBackend,
                    "endpoint rejected echo scoring (" + redact(last_error) +
                        "); use a completions endpoint that accepts echo=true with logprobs");
      }
      break;
    }
  }
  throw Error(ErrorKind::ScoringFailed, redact(last_error));
}

TokenScores RemoteScorer::score_once(const ScoringRequest& request, const std::string& prefix) const {
  const std::string full = prefix + request.target;
  const json body = {{"model", cfg_.model_name}, {"prompt", full}, {"max_tokens", 0}, {"echo", true},
                     {"logprobs", 0}};
  const std::string raw = post_with_retries(body.dump());

  json doc;
  try {
    doc = json::parse(raw);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ScoringFailed, std::string("response is not JSON: ") + e.what());
  }
  const json* lp = nullptr;
  if (doc.contains("choices") && doc["choices"].is_array() && !doc["choices"].empty() &&
      doc["choices"][0].contains("logprobs") && doc["choices"][0]["logprobs"].is_object()) {
    lp = &doc["choices"][0]["logprobs"];
  }
  if (lp == nullptr || !lp->contains("tokens") || !lp->contains("token_logprobs") || !(*lp)["tokens"].is_array() ||
      !(*lp)["token_logprobs"].is_array()) {
    throw Error(ErrorKind::UnsupportedBackend,
                "response has no choices[0].logprobs.tokens/token_logprobs; the endpoint must support "
                "echo=true with logprobs on /v1/completions");
  }
  std::vector<std::string> tokens;
  for (const auto& t : (*lp)["tokens"]) tokens.push_back(t.is_string() ? t.get<std::string>() : std::string());
  const auto& token_lps = (*lp)["token_logprobs"];
  if (token_lps.size() != tokens.size()) throw Error(ErrorKind::ScoringFailed, "tokens/logprobs length mismatch");

  std::vector<std::size_t> offsets;
  std::string joined;
  for (const auto& t : tokens) {
    offsets.push_back(joined.size());
    joined += t;
  }
  if (joined.rfind(full, 0) != 0) {
    // Tokens do not reproduce the prompt byte-for-byte (special tokens, byte
    // pieces); fall back to the server's offsets, which count code points.
    if (!lp->contains("text_offset") || !(*lp)["text_offset"].is_array() ||
        (*lp)["text_offset"].size() != tokens.size()) {
      throw Error(ErrorKind::SpanAlignment, "echoed tokens do not reproduce the prompt and no text_offset given");
    }
    auto cps = (*lp)["text_offset"].get<std::vector<std::size_t>>();
    offsets = codepoint_to_byte_offsets(full, cps);
  }

  const TokenRange range = locate_span(offsets, tokens, prefix.size(), full.size());

  TokenScores out;
  out.scorer_id = cfg_.model_name;
  out.context_digest = context_digest(request.context);
  out.temperature = 1.0;
  std::string span;
  for (std::size_t i = range.first; i < range.last; ++i) {
    const auto& v = token_lps[i];
    if (v.is_null()) {
      if (i == 0) {
        throw Error(ErrorKind::UnsupportedNullContext,
                    "the endpoint gives no logprob for the first prompt token; configure a non-empty null "
                    "context so the target does not start the prompt");
      }
      throw Error(ErrorKind::UnsupportedBackend, "null logprob inside the target span at token " + std::to_string(i));
    }
    if (!v.is_number()) throw Error(ErrorKind::ScoringFailed, "non-numeric logprob");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorKind::NonFiniteScore, "endpoint returned a non-finite logprob");
    out.tokens.push_back(tokens[i]);
    out.logprobs.push_back(std::min(x, 0.0));
    out.offsets.push_back(offsets[i] - prefix.size());
    span += tokens[i];
  }
  if (span != request.target) throw Error(ErrorKind::SpanAlignment, "extracted span differs from the target");
  return out;
}

TokenScores RemoteScorer::score(const ScoringRequest& request) const {
  validate(request);
  if (request.temperature != 1.0) {
    throw Error(ErrorKind::UnsupportedTemperature,
                "remote endpoints cannot rescale echoed logprobs; score at temperature 1");
  }
  const std::string prefix = prefix_for(request);
  try {
    return score_once(request, prefix);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SpanAlignment) throw;
    log("span alignment failed, retrying with separator", e.what());
  }
  return score_once(request, prefix + std::string(kPromptSeparator));
}

}  // namespace hcontrib
