#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "contam/error.hpp"
#include "contam/scorer.hpp"

namespace contam {

// Splits "https://host:port/base" into the httplib scheme-host-port part and
// the path prefix.
struct Url {
  std::string origin;
  std::string path;

  static Url parse(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(Errc::ConfigError, "endpoint '" + url + "' has no scheme");
    const auto path_start = url.find('/', scheme_end + 3);
    Url out;
    out.origin = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? std::string{} : url.substr(path_start);
    while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
    return out;
  }
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30000};
};

struct RemoteConfig {
  std::string endpoint;
  std::string model;
  // Environment variable holding the bearer token; empty means no credentials.
  std::string api_key_env;
  RetryPolicy retry;
  std::chrono::seconds timeout{60};
};

inline nlohmann::json echo_request_body(const std::string& model, const std::string& prompt) {
  return {{"model", model}, {"prompt", prompt}, {"max_tokens", 0}, {"echo", true}, {"logprobs", 1}};
}

// Reads choices[0].logprobs.{tokens,token_logprobs}, drops a leading token
// whose logprob is null and converts natural-log values to log2.
inline TokenScores parse_echo_response(const nlohmann::json& body, const std::string& sample_id) {
  const auto protocol = [&](const std::string& what) {
    fail(Errc::ProtocolError, "sample '" + sample_id + "': " + what);
  };
  if (!body.is_object() || !body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
    protocol("response has no choices");
  }
  const auto& choice = body["choices"][0];
  if (!choice.is_object() || !choice.contains("logprobs") || !choice["logprobs"].is_object()) {
    protocol("choices[0].logprobs missing");
  }
  const auto& lp = choice["logprobs"];
  if (!lp.contains("tokens") || !lp["tokens"].is_array() || !lp.contains("token_logprobs") ||
      !lp["token_logprobs"].is_array()) {
    protocol("logprobs.tokens or logprobs.token_logprobs missing");
  }
  const auto& tokens = lp["tokens"];
  const auto& values = lp["token_logprobs"];
  if (tokens.size() != values.size()) protocol("tokens and token_logprobs differ in length");

  TokenScores out;
  out.sample_id = sample_id;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!tokens[i].is_string()) protocol("non-string token");
    if (values[i].is_null()) {
      if (i == 0) continue;
      protocol("null logprob at position " + std::to_string(i));
    }
    if (!values[i].is_number()) protocol("non-numeric logprob at position " + std::to_string(i));
    const double nat = values[i].get<double>();
    if (!(nat <= 0.0)) protocol("logprob above zero at position " + std::to_string(i));
    out.tokens.push_back(tokens[i].get<std::string>());
    out.logprobs.push_back(nat / std::numbers::ln2);
  }
  if (out.logprobs.empty()) fail(Errc::EmptySequence, "sample '" + sample_id + "': no scored tokens returned");
  return out;
}

namespace detail {

inline bool mentions_context_overflow(const std::string& body) {
  return body.find("context_length_exceeded") != std::string::npos ||
         body.find("maximum context length") != std::string::npos;
}

inline std::optional<std::chrono::milliseconds> retry_after(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return std::nullopt;
  const auto v = res->get_header_value("Retry-After");
  char* end = nullptr;
  const double secs = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || secs < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<long long>(secs * 1000.0));
}

}  // namespace detail

// One echo-scoring call with bounded retries. Connection failures become
// BackendUnavailable, 429 becomes RateLimited, other non-2xx HttpError.
inline TokenScores remote_logprobs(const RemoteConfig& config, const std::string& text,
                                   const std::string& sample_id = "") {
  const Url url = Url::parse(config.endpoint);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config.timeout);
  client.set_read_timeout(config.timeout);
  client.set_write_timeout(config.timeout);
  httplib::Headers headers;
  if (!config.api_key_env.empty()) {
    if (const char* key = std::getenv(config.api_key_env.c_str()); key != nullptr && *key != '\0') {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  const std::string path = url.path + "/v1/completions";
  const std::string body = echo_request_body(config.model, text).dump();

  const int attempts = std::max(1, config.retry.max_attempts);
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt + 1 >= attempts;
    auto backoff = config.retry.base_delay * (1LL << std::min(attempt, 20));
    auto res = client.Post(path, headers, body, "application/json");
    if (!res) {
      if (last) {
        fail(Errc::BackendUnavailable, config.endpoint + " unreachable: " + httplib::to_string(res.error()));
      }
    } else if (res->status >= 200 && res->status < 300) {
      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::ProtocolError, "sample '" + sample_id + "': response is not JSON");
      }
      return parse_echo_response(doc, sample_id);
    } else if (res->status == 429) {
      if (last) fail(Errc::RateLimited, config.endpoint + " kept returning 429");
      if (auto hint = detail::retry_after(res)) backoff = *hint;
    } else if (res->status >= 500) {
      if (last) {
        fail(Errc::HttpError, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
    } else {
      if (detail::mentions_context_overflow(res->body)) {
        fail(Errc::ContextOverflow, "sample '" + sample_id + "' exceeds the backend context window");
      }
      fail(Errc::HttpError, "status " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    std::this_thread::sleep_for(std::min<std::chrono::milliseconds>(
        std::chrono::duration_cast<std::chrono::milliseconds>(backoff), config.retry.max_delay));
  }
}

class RemoteBackend final : public ScorerBackend {
 public:
  explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) fail(Errc::ConfigError, "remote backend needs an endpoint");
    if (config_.model.empty()) fail(Errc::ConfigError, "remote backend needs a model name");
  }

  BackendKind kind() const override { return BackendKind::RemoteLogprob; }
  std::string identity() const override { return config_.model + "@" + config_.endpoint; }
  std::string tokenization() const override { return "backend:" + config_.model; }

  TokenScores score(const VerbalizedSequence& seq) const override {
    return remote_logprobs(config_, seq.text, seq.sample_id);
  }

 private:
  RemoteConfig config_;
};

}  // namespace contam
