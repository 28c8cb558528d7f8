// SPDX-License-Identifier: Apache-2.0
#include "rqvqa/llm.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

/// Splits `text` into `n` tokens that concatenate back to it: whitespace-led
/// words when the count matches, otherwise near-equal character chunks.
std::vector<std::string> split_for_mock(const std::string& text, std::size_t n) {
  if (n == 0) return {};
  if (n == 1) return {text};
  std::vector<std::string> words;
  for (std::size_t i = 0; i < text.size();) {
    std::size_t j = i;
    while (j < text.size() && std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    words.push_back(text.substr(i, j - i));
    i = j;
  }
  if (words.size() == n) return words;
  if (text.size() < n) {
    throw InvalidArgument("mock reply '" + text + "' is shorter than its " + std::to_string(n) +
                          " log-probs");
  }
  std::vector<std::string> chunks;
  std::size_t base = text.size() / n;
  std::size_t extra = text.size() % n;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t len = base + (i < extra ? 1 : 0);
    chunks.push_back(text.substr(pos, len));
    pos += len;
  }
  return chunks;
}

}  // namespace

json CompletionRequest::to_json() const {
  return json{{"model", model},   {"prompt", prompt},     {"max_tokens", max_tokens},
              {"temperature", temperature}, {"logprobs", logprobs}, {"stop", stop}};
}

Completion parse_completion_response(const json& response) {
  if (!response.is_object() || !response.contains("choices") || !response["choices"].is_array() ||
      response["choices"].empty()) {
    throw InvalidArgument("completion response has no choices");
  }
  const json& choice = response["choices"][0];
  if (!choice.contains("text") || !choice["text"].is_string()) {
    throw InvalidArgument("completion response has no text");
  }
  if (!choice.contains("logprobs") || !choice["logprobs"].is_object()) {
    throw InvalidArgument("completion response is missing log-probs");
  }
  const json& lp = choice["logprobs"];
  if (!lp.contains("tokens") || !lp.contains("token_logprobs") || !lp["tokens"].is_array() ||
      !lp["token_logprobs"].is_array()) {
    throw InvalidArgument("completion response is missing token log-probs");
  }
  Completion out;
  out.text = choice["text"].get<std::string>();
  for (const auto& t : lp["tokens"]) out.tokens.push_back(t.get<std::string>());
  for (const auto& v : lp["token_logprobs"]) {
    if (!v.is_number()) throw InvalidArgument("non-numeric token log-prob");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw InvalidArgument("non-finite token log-prob");
    out.token_logprobs.push_back(x);
  }
  if (out.tokens.size() != out.token_logprobs.size()) {
    throw InvalidArgument("completion response has mismatched tokens and log-probs");
  }
  return out;
}

json make_completion_response(const Completion& completion) {
  return json{{"choices", json::array({json{
                              {"index", 0},
                              {"text", completion.text},
                              {"logprobs", json{{"tokens", completion.tokens},
                                                {"token_logprobs", completion.token_logprobs}}},
                          }})}};
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::string cache_key(const CompletionRequest& request) { return sha256_hex(request.to_json().dump()); }

// ---------------------------------------------------------------------------

HttpTransport::HttpTransport(std::string endpoint, std::optional<std::string> api_key,
                             std::chrono::seconds timeout)
    : api_key_(std::move(api_key)), timeout_(timeout) {
  auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint must be a URL: " + endpoint);
  auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    base_url_ = endpoint;
    path_ = "/";
  } else {
    base_url_ = endpoint.substr(0, path_start);
    path_ = endpoint.substr(path_start);
  }
}

json HttpTransport::post(const json& body) {
  httplib::Client client(base_url_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  httplib::Headers headers;
  if (api_key_) headers.emplace("Authorization", "Bearer " + *api_key_);
  auto result = client.Post(path_, headers, body.dump(), "application/json");
  if (!result) throw TransportError(0, httplib::to_string(result.error()));
  if (result->status != 200) {
    throw TransportError(result->status, result->body.substr(0, 200));
  }
  try {
    return json::parse(result->body);
  } catch (const json::parse_error& e) {
    throw TransportError(result->status, std::string("unparseable response body: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

MockBackend::MockBackend(json script) : script_(std::move(script)) {
  if (!script_.is_object()) throw InputError("mock script must be a JSON object");
}

std::shared_ptr<MockBackend> MockBackend::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mock script " + path.string());
  try {
    return std::make_shared<MockBackend>(json::parse(in));
  } catch (const json::parse_error& e) {
    throw InputError("mock script " + path.string() + ": " + e.what());
  }
}

const json& MockBackend::lookup(const std::string& prompt) const {
  if (auto it = script_.find(prompt); it != script_.end()) return *it;
  if (auto it = script_.find(sha256_hex(prompt)); it != script_.end()) return *it;
  auto fallback = script_.find("*");
  if (fallback == script_.end()) {
    throw TransportError(404, "mock: unscripted prompt " + sha256_hex(prompt));
  }
  if (fallback->contains("choices")) {
    const json& choices = (*fallback)["choices"];
    if (!choices.is_array() || choices.empty()) throw InputError("mock fallback has no choices");
    // First 8 hex digits of the prompt hash pick the reply.
    auto index = std::stoull(sha256_hex(prompt).substr(0, 8), nullptr, 16) % choices.size();
    return choices[index];
  }
  return *fallback;
}

json MockBackend::post(const json& body) {
  ++calls_;
  const std::string prompt = body.at("prompt").get<std::string>();
  const json& reply = lookup(prompt);
  if (reply.contains("error")) {
    const json& err = reply["error"];
    throw TransportError(err.value("status", 500), err.value("reason", std::string("scripted failure")));
  }
  Completion completion;
  completion.text = reply.at("text").get<std::string>();
  completion.token_logprobs = reply.at("token_logprobs").get<std::vector<double>>();
  if (reply.contains("tokens")) {
    completion.tokens = reply["tokens"].get<std::vector<std::string>>();
  } else {
    completion.tokens = split_for_mock(completion.text, completion.token_logprobs.size());
  }
  return make_completion_response(completion);
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

fs::path ResponseCache::path_for(const std::string& key) const {
  return dir_ / key.substr(0, 2) / (key + ".json");
}

std::optional<json> ResponseCache::get(const std::string& key) const {
  std::ifstream in(path_for(key), std::ios::binary);
  if (!in) return std::nullopt;
  try {
    return json::parse(in);
  } catch (const json::parse_error&) {
    return std::nullopt;
  }
}

void ResponseCache::put(const std::string& key, const json& response) const {
  fs::path target = path_for(key);
  fs::create_directories(target.parent_path());
  std::ostringstream suffix;
  suffix << ".tmp." << std::this_thread::get_id() << '.'
         << std::chrono::steady_clock::now().time_since_epoch().count();
  fs::path temp = target;
  temp += suffix.str();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write cache file " + temp.string());
    out << response.dump();
    if (!out) throw Error("cannot write cache file " + temp.string());
  }
  fs::rename(temp, target);
}

// ---------------------------------------------------------------------------

CompletionClient::CompletionClient(std::shared_ptr<Transport> transport,
                                   std::shared_ptr<const ResponseCache> cache, RetryPolicy retry,
                                   std::size_t max_in_flight)
    : transport_(std::move(transport)),
      cache_(std::move(cache)),
      retry_(std::move(retry)),
      max_in_flight_(std::clamp<std::size_t>(max_in_flight, 1, 1024)),
      in_flight_(static_cast<std::ptrdiff_t>(max_in_flight_)) {
  if (!transport_) throw InvalidArgument("CompletionClient needs a transport");
  if (retry_.attempts < 1) throw InvalidArgument("retry attempts must be >= 1");
  if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

json CompletionClient::call_with_retries(const json& body) {
  auto backoff = retry_.initial_backoff;
  for (int attempt = 1;; ++attempt) {
    try {
      in_flight_.acquire();
      ++backend_calls_;
      struct Release {
        std::counting_semaphore<1024>& sem;
        ~Release() { sem.release(); }
      } release{in_flight_};
      return transport_->post(body);
    } catch (const TransportError& e) {
      if (!e.retryable() || attempt >= retry_.attempts) throw;
    }
    retry_.sleep(backoff);
    backoff *= 2;
  }
}

Completion CompletionClient::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw InvalidArgument("completion prompt is empty");
  ++requests_;
  const std::string key = cache_key(request);
  if (cache_) {
    if (auto hit = cache_->get(key)) {
      ++cache_hits_;
      return parse_completion_response(*hit);
    }
  }
  json response = call_with_retries(request.to_json());
  Completion completion = parse_completion_response(response);
  if (cache_) cache_->put(key, response);
  return completion;
}

double answer_confidence(const Completion& completion, const std::vector<std::string>& stop,
                         ConfidenceMode mode) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < completion.tokens.size(); ++i) {
    const auto& token = completion.tokens[i];
    if (is_blank(token) || std::find(stop.begin(), stop.end(), token) != stop.end()) continue;
    sum += completion.token_logprobs.at(i);
    ++count;
  }
  if (count == 0) throw InvalidArgument("completion has no answer tokens");
  if (mode == ConfidenceMode::kLengthNormalized) sum /= static_cast<double>(count);
  return std::exp(sum);
}

}  // namespace rqvqa
