#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/error.hpp"
#include "contam/ngram.hpp"
#include "contam/verbalizer.hpp"

namespace contam {

// Per-token log2 conditional probabilities for one sequence.
struct TokenScores {
  std::string sample_id;
  std::vector<std::string> tokens;
  std::vector<double> logprobs;

  std::size_t size() const { return logprobs.size(); }

  void validate() const {
    if (logprobs.empty()) fail(Errc::EmptySequence, "sample '" + sample_id + "' has no scored tokens");
    if (tokens.size() != logprobs.size()) {
      fail(Errc::InvalidArgument, "sample '" + sample_id + "' has misaligned tokens and logprobs");
    }
    for (double lp : logprobs) {
      if (!(lp <= 0.0)) fail(Errc::InvalidArgument, "sample '" + sample_id + "' has a logprob above zero or NaN");
    }
  }

  friend bool operator==(const TokenScores&, const TokenScores&) = default;
};

// Log-perplexity of one sequence in bits per token. word_count and provenance
// are carried through for reporting.
struct PerplexityResult {
  std::string sample_id;
  double bits_per_token = 0.0;
  std::size_t n_tokens = 0;
  std::size_t word_count = 0;
  std::string provenance;

  friend bool operator==(const PerplexityResult&, const PerplexityResult&) = default;
};

// -(1/N) * sum(log2 q(d_i | d_<i)).
inline PerplexityResult perplexity(const TokenScores& scores) {
  if (scores.logprobs.empty()) fail(Errc::EmptySequence, "sample '" + scores.sample_id + "' has N == 0");
  double sum = 0.0;
  for (double lp : scores.logprobs) sum += lp;
  const double n = static_cast<double>(scores.logprobs.size());
  double bits = -sum / n;
  if (bits == 0.0) bits = 0.0;  // normalise -0.0
  return PerplexityResult{scores.sample_id, bits, scores.logprobs.size(), 0, {}};
}

enum class BackendKind { NgramOracle, RemoteLogprob };

inline std::string_view to_string(BackendKind k) {
  return k == BackendKind::NgramOracle ? "NgramOracle" : "RemoteLogprob";
}

class ScorerBackend {
 public:
  virtual ~ScorerBackend() = default;
  virtual BackendKind kind() const = 0;
  // Model name or endpoint, recorded in score artifacts.
  virtual std::string identity() const = 0;
  virtual std::string tokenization() const = 0;
  virtual TokenScores score(const VerbalizedSequence& seq) const = 0;
};

inline TokenScores score_sequence(const ScorerBackend& backend, const VerbalizedSequence& seq) {
  if (seq.text.empty()) fail(Errc::EmptySequence, "sample '" + seq.sample_id + "' has empty text");
  TokenScores scores = backend.score(seq);
  scores.validate();
  return scores;
}

class NgramBackend final : public ScorerBackend {
 public:
  // max_tokens == 0 means unlimited.
  explicit NgramBackend(std::shared_ptr<const NgramModel> model, std::size_t max_tokens = 0, std::string name = "ngram")
      : model_(std::move(model)), max_tokens_(max_tokens), name_(std::move(name)) {
    if (!model_) fail(Errc::BackendUnavailable, "n-gram backend constructed without a model");
  }

  BackendKind kind() const override { return BackendKind::NgramOracle; }
  std::string identity() const override {
    return name_ + ":order=" + std::to_string(model_->order()) + ",|V|=" + std::to_string(model_->vocab_size());
  }
  std::string tokenization() const override { return "lowercased-whitespace"; }

  TokenScores score(const VerbalizedSequence& seq) const override {
    auto tokens = NgramModel::tokenize(seq.text);
    if (tokens.empty()) fail(Errc::EmptySequence, "sample '" + seq.sample_id + "' has no tokens");
    if (max_tokens_ != 0 && tokens.size() > max_tokens_) {
      fail(Errc::ContextOverflow, "sample '" + seq.sample_id + "' has " + std::to_string(tokens.size()) +
                                      " tokens, limit " + std::to_string(max_tokens_));
    }
    auto logprobs = model_->log2_probabilities(tokens);
    return TokenScores{seq.sample_id, std::move(tokens), std::move(logprobs)};
  }

  const NgramModel& model() const { return *model_; }

 private:
  std::shared_ptr<const NgramModel> model_;
  std::size_t max_tokens_;
  std::string name_;
};

// Every token gets probability 1/vocab_size.
class UniformBackend final : public ScorerBackend {
 public:
  explicit UniformBackend(std::uint64_t vocab_size) : vocab_size_(vocab_size) {
    if (vocab_size == 0) fail(Errc::InvalidArgument, "uniform oracle needs a non-empty vocabulary");
  }
  BackendKind kind() const override { return BackendKind::NgramOracle; }
  std::string identity() const override { return "uniform:|V|=" + std::to_string(vocab_size_); }
  std::string tokenization() const override { return "lowercased-whitespace"; }

  TokenScores score(const VerbalizedSequence& seq) const override {
    auto tokens = NgramModel::tokenize(seq.text);
    if (tokens.empty()) fail(Errc::EmptySequence, "sample '" + seq.sample_id + "' has no tokens");
    const double lp = -std::log2(static_cast<double>(vocab_size_));
    std::vector<double> logprobs(tokens.size(), lp);
    return TokenScores{seq.sample_id, std::move(tokens), std::move(logprobs)};
  }

 private:
  std::uint64_t vocab_size_;
};

struct BatchOptions {
  std::size_t max_in_flight = 1;
  bool lenient = false;
  // Abort once this many failures happen back to back; 0 disables the limit.
  std::size_t max_consecutive_failures = 0;
};

struct BatchFailure {
  std::size_t index = 0;
  std::string sample_id;
  Errc code = Errc::InvalidArgument;
  std::string message;
};

struct BatchResult {
  // Aligned with the input; empty slots are failures.
  std::vector<std::optional<TokenScores>> scores;
  std::vector<BatchFailure> failures;

  std::vector<TokenScores> successes() const {
    std::vector<TokenScores> out;
    for (const auto& s : scores) {
      if (s) out.push_back(*s);
    }
    return out;
  }
};

inline BatchResult score_batch(const ScorerBackend& backend, const std::vector<VerbalizedSequence>& seqs,
                               const BatchOptions& options = {}) {
  if (options.max_in_flight == 0) fail(Errc::InvalidArgument, "max_in_flight must be >= 1");
  BatchResult result;
  result.scores.resize(seqs.size());
  if (seqs.empty()) return result;

  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::size_t consecutive = 0;
  bool aborted = false;

  const auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= seqs.size()) return;
      try {
        auto scores = score_sequence(backend, seqs[i]);
        std::lock_guard lock(mu);
        result.scores[i] = std::move(scores);
        consecutive = 0;
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        result.failures.push_back({i, seqs[i].sample_id, e.code(), e.detail()});
        ++consecutive;
        if (!options.lenient) stop = true;
        if (options.max_consecutive_failures != 0 && consecutive >= options.max_consecutive_failures) {
          aborted = true;
          stop = true;
        }
      }
    }
  };

  const std::size_t workers = std::min(options.max_in_flight, seqs.size());
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  std::sort(result.failures.begin(), result.failures.end(),
            [](const BatchFailure& a, const BatchFailure& b) { return a.index < b.index; });
  if (aborted) {
    fail(Errc::BatchAborted, std::to_string(options.max_consecutive_failures) +
                                 " consecutive scoring failures; last: " + result.failures.back().message);
  }
  if (!options.lenient && !result.failures.empty()) {
    const auto& f = result.failures.front();
    throw Error(f.code, "sample '" + f.sample_id + "': " + f.message);
  }
  return result;
}

inline nlohmann::json to_json(const TokenScores& s) {
  return {{"sample_id", s.sample_id}, {"tokens", s.tokens}, {"logprobs", s.logprobs}};
}

inline TokenScores token_scores_from_json(const nlohmann::json& j) {
  TokenScores s{j.at("sample_id").get<std::string>(), j.at("tokens").get<std::vector<std::string>>(),
                j.at("logprobs").get<std::vector<double>>()};
  s.validate();
  return s;
}

}  // namespace contam
