#pragma once

// Chat-completion gateway: response cache, retries, single-flight
// deduplication, bounded batches, and the offline mock backend.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "gistkit/errors.hpp"
#include "gistkit/prompt.hpp"

namespace gistkit::llm {

struct CompletionRequest {
  std::string model_id;
  prompt::PromptBundle prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  /// Distinguishes repeated draws of one prompt (judge samples). Zero leaves
  /// the key unchanged.
  int sample = 0;

  /// SHA-256 over the canonical JSON of model, prompt bytes, temperature and
  /// max_tokens (and sample when non-zero).
  std::string key() const;
};

struct Usage {
  int prompt_tokens = 0;
  int completion_tokens = 0;

  bool operator==(const Usage&) const = default;
};

struct CompletionResponse {
  std::string text;
  Usage usage;
  bool cached = false;
  long latency_ms = 0;
};

/// What a provider returns for one call.
struct ProviderReply {
  std::string text;
  Usage usage;
};

/// A provider. call() throws GatewayError (status 0 for transport failures)
/// or ProtocolError for malformed payloads. Must be callable from several
/// threads at once.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual ProviderReply call(const CompletionRequest& request) = 0;
};

/// 429, 5xx and transport failures (status 0) are retried.
bool is_retryable_status(int status);

/// Content-addressed response store: one <key>.json per request holding the
/// body and its checksum. Unreadable or corrupt files read as misses.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  std::optional<ProviderReply> load(const std::string& key) const;
  void store(const std::string& key, const ProviderReply& reply) const;
  std::string path_for(const std::string& key) const;

  static std::string checksum(const Json& body);

 private:
  std::string dir_;
};

struct GatewayOptions {
  std::string cache_dir;  // empty: in-memory cache only
  int max_attempts = 4;
  std::chrono::milliseconds base_delay{500};
};

struct BatchFailure {
  std::size_t index;
  ErrorCode code;
  std::string message;
};

struct BatchOutcome {
  std::vector<std::optional<CompletionResponse>> responses;  // input order
  std::vector<BatchFailure> failures;

  bool ok() const { return failures.empty(); }
  /// "failed requests: 1, 4 (...)"; empty when ok().
  std::string summary() const;
};

class Gateway {
 public:
  explicit Gateway(std::shared_ptr<Backend> backend, GatewayOptions options = {});

  /// Cache hit returns the stored body with cached=true. A miss makes one
  /// provider call, retried with exponential backoff up to max_attempts.
  /// Concurrent calls with the same key share one provider call.
  CompletionResponse complete(const CompletionRequest& request);

  /// Runs requests on at most `max_in_flight` worker threads. Failures are
  /// reported per index; successful responses are still returned.
  BatchOutcome complete_batch(const std::vector<CompletionRequest>& requests, int max_in_flight);

  /// Provider calls made so far, retries included.
  std::uint64_t provider_calls() const { return provider_calls_.load(); }
  const Backend& backend() const { return *backend_; }

 private:
  CompletionResponse fetch(const CompletionRequest& request);

  std::shared_ptr<Backend> backend_;
  GatewayOptions options_;
  std::optional<ResponseCache> disk_;
  std::mutex mutex_;
  std::map<std::string, ProviderReply> memory_;
  std::map<std::string, std::shared_future<ProviderReply>> in_flight_;
  std::atomic<std::uint64_t> provider_calls_{0};
};

/// Throws ContractViolation for temperature outside [0,2] or max_tokens < 1.
void validate_request(const CompletionRequest& request);

// ---------------------------------------------------------------------------

/// Deterministic offline provider. The reply is a pure function of the
/// request key and the prompt: the first 16 hex digits of the key seed an
/// mt19937_64, and the template id selects the reply shape.
///
///   profile_gen_lamp      Keywords/Topics/Writing Style/Preferences lists
///   profile_gen_psw, up0  Research Interests list
///   lamp1                 "[1]" or "[2]" (seed parity)
///   lamp2                 one of the listed category names (seed mod count)
///   lamp3                 rating 1 + seed mod 5
///   geval                 short reasoning line, then a JSON score object
///   other tasks           words drawn from the task section of the prompt
///
/// Overrides replace the reply for any prompt containing the needle; the
/// first matching override wins.
class MockBackend : public Backend {
 public:
  struct Override {
    std::string needle;
    std::string reply;
  };

  MockBackend() = default;
  explicit MockBackend(std::vector<Override> overrides) : overrides_(std::move(overrides)) {}

  std::string name() const override { return "mock"; }
  ProviderReply call(const CompletionRequest& request) override;

  /// Seed derived from a request key.
  static std::uint64_t seed_of(const std::string& key);

  std::uint64_t calls() const { return calls_.load(); }

 private:
  std::vector<Override> overrides_;
  std::atomic<std::uint64_t> calls_{0};
};

/// OpenAI-compatible /chat/completions client.
class RemoteBackend : public Backend {
 public:
  struct Options {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::chrono::seconds timeout{120};
  };

  explicit RemoteBackend(Options options);

  /// Reads OPENAI_API_KEY and OPENAI_BASE_URL.
  static Options options_from_env();

  std::string name() const override { return "remote"; }
  ProviderReply call(const CompletionRequest& request) override;

  /// Chat-completion request body.
  static Json request_body(const CompletionRequest& request);
  /// Extracts the reply; throws ProtocolError on a malformed payload.
  static ProviderReply parse_reply(const std::string& body);

 private:
  Options options_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;    // path prefix + /chat/completions
};

/// "mock" or "remote"; anything else is a ContractViolation.
std::shared_ptr<Backend> make_backend(const std::string& kind);

}  // namespace gistkit::llm
