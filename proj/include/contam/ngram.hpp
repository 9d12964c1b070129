#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/error.hpp"
#include "contam/text.hpp"

namespace contam {

// Add-alpha smoothed n-gram model over whitespace tokens. Immutable once
// trained, so concurrent reads are safe.
//
//   P(token | ctx) = (count(ctx, token) + alpha) / (count(ctx, *) + alpha * |V|)
//
// Sequences are padded with order-1 BOS markers and one EOS marker during
// training. V holds every observed token plus BOS, EOS and UNK.
class NgramModel {
 public:
  static constexpr std::string_view kBos = "<s>";
  static constexpr std::string_view kEos = "</s>";
  static constexpr std::string_view kUnk = "<unk>";
  static constexpr int kFormatVersion = 1;

  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<std::string, std::uint64_t> next;
  };

  static NgramModel train(const std::vector<std::vector<std::string>>& corpus, int order, double alpha = 1.0) {
    if (corpus.empty()) fail(Errc::EmptyCorpus, "cannot train an n-gram model on an empty corpus");
    NgramModel m(order, alpha);
    for (const auto& seq : corpus) {
      for (const auto& tok : seq) m.vocab_.insert(tok);
    }
    m.vocab_.insert(std::string(kBos));
    m.vocab_.insert(std::string(kEos));
    m.vocab_.insert(std::string(kUnk));
    for (const auto& seq : corpus) {
      std::vector<std::string> padded(static_cast<std::size_t>(order - 1), std::string(kBos));
      padded.insert(padded.end(), seq.begin(), seq.end());
      padded.emplace_back(kEos);
      const std::size_t ctx_len = static_cast<std::size_t>(order - 1);
      for (std::size_t i = ctx_len; i < padded.size(); ++i) {
        auto& cc = m.counts_[context_key(std::span(padded).subspan(i - ctx_len, ctx_len))];
        ++cc.total;
        ++cc.next[padded[i]];
      }
    }
    m.index_vocab();
    return m;
  }

  // Lowercased whitespace words.
  static std::vector<std::string> tokenize(std::string_view s) {
    auto words = text::split_words(s);
    for (auto& w : words) w = text::to_lower(w);
    return words;
  }

  int order() const { return order_; }
  double alpha() const { return alpha_; }
  const std::set<std::string>& vocabulary() const { return vocab_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  const std::unordered_map<std::string, ContextCounts>& counts() const { return counts_; }

  bool in_vocab(const std::string& tok) const { return vocab_index_.count(tok) > 0; }
  const std::string& map_token(const std::string& tok) const {
    static const std::string unk(kUnk);
    return in_vocab(tok) ? tok : unk;
  }

  // `context` holds exactly order-1 tokens (already padded); tokens outside
  // V are read as UNK on both sides.
  double probability(std::span<const std::string> context, const std::string& token) const {
    if (context.size() != static_cast<std::size_t>(order_ - 1)) {
      fail(Errc::InvalidArgument, "context length must equal order-1");
    }
    std::vector<std::string> mapped;
    mapped.reserve(context.size());
    for (const auto& c : context) mapped.push_back(map_token(c));
    return probability_mapped(context_key(mapped), map_token(token));
  }

  // log2 q(t_i | t_<i) for every token of `tokens`, conditioning the first
  // order-1 positions on BOS padding. EOS is not scored.
  std::vector<double> log2_probabilities(const std::vector<std::string>& tokens) const {
    const std::size_t ctx_len = static_cast<std::size_t>(order_ - 1);
    std::vector<std::string> padded(ctx_len, std::string(kBos));
    for (const auto& t : tokens) padded.push_back(map_token(t));
    std::vector<double> out;
    out.reserve(tokens.size());
    for (std::size_t i = ctx_len; i < padded.size(); ++i) {
      const auto key = context_key(std::span(padded).subspan(i - ctx_len, ctx_len));
      out.push_back(std::log2(probability_mapped(key, padded[i])));
    }
    return out;
  }

  nlohmann::json to_json() const {
    nlohmann::json counts = nlohmann::json::array();
    std::map<std::string, const ContextCounts*> sorted;
    for (const auto& [key, cc] : counts_) sorted.emplace(key, &cc);
    for (const auto& [key, cc] : sorted) {
      std::map<std::string, std::uint64_t> next(cc->next.begin(), cc->next.end());
      counts.push_back({{"context", split_key(key, order_ - 1)}, {"next", next}});
    }
    return {{"format", "contam-ngram"}, {"version", kFormatVersion}, {"order", order_},
            {"alpha", alpha_}, {"vocabulary", vocab_}, {"counts", counts}};
  }

  static NgramModel from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "contam-ngram") fail(Errc::FormatVersion, "not an n-gram model document");
    if (j.value("version", 0) != kFormatVersion) fail(Errc::FormatVersion, "unsupported n-gram model version");
    NgramModel m(j.at("order").get<int>(), j.at("alpha").get<double>());
    for (const auto& t : j.at("vocabulary")) m.vocab_.insert(t.get<std::string>());
    for (const auto& entry : j.at("counts")) {
      const auto ctx = entry.at("context").get<std::vector<std::string>>();
      if (ctx.size() != static_cast<std::size_t>(m.order_ - 1)) fail(Errc::FormatVersion, "context length mismatch");
      auto& cc = m.counts_[context_key(ctx)];
      for (const auto& [tok, n] : entry.at("next").items()) {
        const auto c = n.get<std::uint64_t>();
        cc.next[tok] = c;
        cc.total += c;
      }
    }
    m.index_vocab();
    return m;
  }

 private:
  NgramModel(int order, double alpha) : order_(order), alpha_(alpha) {
    if (order < 1) fail(Errc::InvalidArgument, "n-gram order must be >= 1");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) fail(Errc::InvalidArgument, "smoothing alpha must be positive");
  }

  static std::string context_key(std::span<const std::string> ctx) {
    std::string key;
    for (std::size_t i = 0; i < ctx.size(); ++i) {
      if (i) key += '\x1f';
      key += ctx[i];
    }
    return key;
  }

  static std::vector<std::string> split_key(const std::string& key, int ctx_len) {
    std::vector<std::string> out;
    if (ctx_len == 0) return out;
    std::size_t start = 0;
    for (;;) {
      const auto pos = key.find('\x1f', start);
      out.push_back(key.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return out;
  }

  double probability_mapped(const std::string& key, const std::string& token) const {
    const double denom_extra = alpha_ * static_cast<double>(vocab_.size());
    const auto it = counts_.find(key);
    if (it == counts_.end()) return alpha_ / denom_extra;
    const auto jt = it->second.next.find(token);
    const double c = jt == it->second.next.end() ? 0.0 : static_cast<double>(jt->second);
    return (c + alpha_) / (static_cast<double>(it->second.total) + denom_extra);
  }

  void index_vocab() { vocab_index_ = std::unordered_set<std::string>(vocab_.begin(), vocab_.end()); }

  int order_;
  double alpha_;
  std::set<std::string> vocab_;
  std::unordered_set<std::string> vocab_index_;
  std::unordered_map<std::string, ContextCounts> counts_;
};

}  // namespace contam
