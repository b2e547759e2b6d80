#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "xmusim/error.hpp"

namespace xmusim {

/// Musical characteristics the prompt asks for, in prompt order.
const std::vector<std::string>& default_target_fields();

struct DescriptionRequest {
  std::string title;
  std::string artist;
  std::vector<std::string> target_fields = default_target_fields();

  /// Throws UsageError when the title, artist or field list is empty.
  void validate() const;
};

struct DescriptionResult {
  std::string caption;
  std::vector<std::string> aspects;
  std::string raw_response;
  std::string provider;

  bool operator==(const DescriptionResult&) const = default;
};

/// A response the parser could not interpret. Keeps the raw text for fallbacks.
class ParseError : public ServiceError {
 public:
  ParseError(const std::string& message, std::string raw) : ServiceError(message), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

inline constexpr std::size_t kMaxAspectWords = 6;

std::string build_prompt(const DescriptionRequest& req);

/// Reads "<Field>: value" lines for the given fields (labels match case-insensitively) and
/// the "Aspects:" line. The caption joins the field values as sentences in field order.
/// Aspects are split on commas, trimmed, deduplicated case-insensitively (first spelling
/// wins) and dropped when longer than kMaxAspectWords words. Throws ParseError when no
/// field line, no Aspects line or no usable aspect is present.
DescriptionResult parse_response(std::string_view raw, const std::vector<std::string>& fields = default_target_fields());

const std::set<std::string>& default_stopwords();

/// Lowercased unigrams and adjacent bigrams that contain no stopword, ranked by frequency
/// and then by first occurrence; at most 10. Throws UsageError for an empty caption.
std::vector<std::string> extract_aspects_fallback(std::string_view caption,
                                                  const std::set<std::string>& stopwords = default_stopwords());

/// Deterministic, well-formed response derived from a hash of (title, artist).
std::string mock_response(const DescriptionRequest& req);

struct HttpResponse {
  int status = 0;
  std::string body;
};

/// Connection-level failure (refused, timeout, DNS).
class TransportError : public ServiceError {
 public:
  using ServiceError::ServiceError;
};

/// Sends one JSON request body to the chat endpoint. Implementations must be thread-safe.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& json_body) = 0;
};

/// HTTP(S) transport to an OpenAI-style chat-completions URL.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(60));
  HttpResponse post(const std::string& json_body) override;

 private:
  std::string origin_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct LlmClientConfig {
  bool mock = true;
  std::string url;
  std::string api_key;
  std::string model = "gpt-4o-mini";
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff{500};  // doubled after every failed attempt
  std::size_t max_in_flight = 4;
  SleepFn sleep;                           // defaults to std::this_thread::sleep_for

  /// Fills url and api_key from XMUSIM_LLM_URL and XMUSIM_LLM_KEY; mock stays as given.
  static LlmClientConfig from_env(bool mock);
};

std::string chat_request_body(const std::string& model, const std::string& prompt);
/// Extracts choices[0].message.content. Throws ParseError on any other shape.
std::string chat_response_text(const std::string& body);

/// Mock mode never touches `transport`. Otherwise: prompt, POST, parse, with up to
/// max_attempts attempts separated by exponential backoff. Connection errors, 429, 5xx
/// and unparseable bodies are retried; other 4xx statuses fail at once. Throws
/// ServiceError (ParseError when the last attempt failed to parse).
DescriptionResult describe(const DescriptionRequest& req, const LlmClientConfig& cfg, Transport* transport);

/// Runs describe for every request with at most max_in_flight concurrent calls. Results
/// keep request order; the error of the earliest failing request is rethrown.
std::vector<DescriptionResult> describe_batch(const std::vector<DescriptionRequest>& reqs, const LlmClientConfig& cfg,
                                              Transport* transport);

}  // namespace xmusim
