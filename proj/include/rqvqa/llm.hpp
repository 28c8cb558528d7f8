// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rqvqa {

struct CompletionRequest {
  std::string model;
  std::string prompt;
  int max_tokens = 16;
  double temperature = 0.0;
  int logprobs = 1;
  std::vector<std::string> stop = {"\n"};

  /// Wire body: exactly {model, prompt, max_tokens, temperature, logprobs, stop}.
  nlohmann::json to_json() const;
};

struct Completion {
  std::string text;
  std::vector<std::string> tokens;
  std::vector<double> token_logprobs;

  bool operator==(const Completion&) const = default;
};

/// Reads choices[0].text and choices[0].logprobs.{tokens, token_logprobs}.
/// Throws InvalidArgument when log-probs are missing or malformed.
Completion parse_completion_response(const nlohmann::json& response);
/// Completions-endpoint response body holding a single choice.
nlohmann::json make_completion_response(const Completion& completion);

std::string sha256_hex(std::string_view data);
/// SHA-256 of the canonical (sorted keys, UTF-8) request JSON.
std::string cache_key(const CompletionRequest& request);

/// Something that accepts a completions request body and returns the raw response body.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws TransportError on failure.
  virtual nlohmann::json post(const nlohmann::json& body) = 0;
};

/// JSON over HTTP(S). `endpoint` is a full URL such as http://localhost:8000/v1/completions.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string endpoint, std::optional<std::string> api_key,
                std::chrono::seconds timeout = std::chrono::seconds(60));
  nlohmann::json post(const nlohmann::json& body) override;

 private:
  std::string base_url_;
  std::string path_;
  std::optional<std::string> api_key_;
  std::chrono::seconds timeout_;
};

/// Scripted backend for tests and offline runs.
///
/// The script maps an exact prompt, or the SHA-256 hex of a prompt, to a reply
/// `{"text": ..., "token_logprobs": [...], "tokens": [...]}` (tokens optional).
/// The key "*" is the fallback for unscripted prompts; it may hold a single
/// reply or `{"choices": [reply, ...]}`, in which case the reply is picked by
/// prompt hash. A reply `{"error": {"status": 400, "reason": "..."}}` fails.
class MockBackend final : public Transport {
 public:
  explicit MockBackend(nlohmann::json script);
  static std::shared_ptr<MockBackend> from_file(const std::filesystem::path& path);

  nlohmann::json post(const nlohmann::json& body) override;
  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  const nlohmann::json& lookup(const std::string& prompt) const;

  nlohmann::json script_;
  std::atomic<std::size_t> calls_{0};
};

/// Content-addressed response store: <dir>/<key[0:2]>/<key>.json, written atomically.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::filesystem::path path_for(const std::string& key) const;
  std::optional<nlohmann::json> get(const std::string& key) const;
  void put(const std::string& key, const nlohmann::json& response) const;

 private:
  std::filesystem::path dir_;
};

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{1000};
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Thread-safe completion client: cache first, then the transport with bounded
/// retries. At most `max_in_flight` transport calls run at once.
class CompletionClient {
 public:
  CompletionClient(std::shared_ptr<Transport> transport, std::shared_ptr<const ResponseCache> cache = nullptr,
                   RetryPolicy retry = {}, std::size_t max_in_flight = 4);

  Completion complete(const CompletionRequest& request);

  std::size_t requests() const noexcept { return requests_.load(); }
  std::size_t cache_hits() const noexcept { return cache_hits_.load(); }
  std::size_t backend_calls() const noexcept { return backend_calls_.load(); }
  std::size_t max_in_flight() const noexcept { return max_in_flight_; }

 private:
  nlohmann::json call_with_retries(const nlohmann::json& body);

  std::shared_ptr<Transport> transport_;
  std::shared_ptr<const ResponseCache> cache_;
  RetryPolicy retry_;
  std::size_t max_in_flight_;
  std::counting_semaphore<1024> in_flight_;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
  std::atomic<std::size_t> backend_calls_{0};
};

enum class ConfidenceMode { kJoint, kLengthNormalized };

/// Probability of the generated answer: exp of the summed token log-probs,
/// ignoring whitespace-only tokens and tokens equal to a stop sequence.
/// kLengthNormalized uses the mean instead of the sum.
/// Throws InvalidArgument when no answer token remains.
double answer_confidence(const Completion& completion, const std::vector<std::string>& stop = {"\n"},
                         ConfidenceMode mode = ConfidenceMode::kJoint);

}  // namespace rqvqa
