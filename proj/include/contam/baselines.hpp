#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/date.hpp"
#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/rng.hpp"
#include "contam/text.hpp"
#include "contam/verbalizer.hpp"

namespace contam {

enum class BaselineLabel { Memorised, Clean };
enum class SourceKind { WikipediaRevisions, LocalCorpus };

inline std::string_view to_string(BaselineLabel l) { return l == BaselineLabel::Memorised ? "memorised" : "clean"; }
inline std::string_view to_string(SourceKind s) {
  return s == SourceKind::WikipediaRevisions ? "WikipediaRevisions" : "LocalCorpus";
}

inline BaselineLabel parse_label(std::string_view s) {
  if (s == "memorised" || s == "Memorised") return BaselineLabel::Memorised;
  if (s == "clean" || s == "Clean") return BaselineLabel::Clean;
  fail(Errc::InvalidArgument, "unknown baseline label '" + std::string(s) + "'");
}

inline SourceKind parse_source(std::string_view s) {
  if (s == "WikipediaRevisions") return SourceKind::WikipediaRevisions;
  if (s == "LocalCorpus") return SourceKind::LocalCorpus;
  fail(Errc::InvalidArgument, "unknown baseline source '" + std::string(s) + "'");
}

// Where a baseline text came from: page title + revision id + timestamp, or
// a corpus file path + creation date.
struct Provenance {
  std::string source;
  std::string revision_id;
  std::string timestamp;  // ISO-8601 date or date-time

  Date date() const { return Date::parse(timestamp); }

  std::string to_string() const {
    std::string out = source;
    if (!revision_id.empty()) out += "#" + revision_id;
    return out + "@" + timestamp;
  }

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Document {
  std::string text;
  Provenance provenance;
};

// Model facts that constrain baseline windows.
struct ModelDates {
  Date release_date;
  TimeWindow training_window;
};

struct BaselineSpec {
  BaselineLabel label = BaselineLabel::Clean;
  SourceKind source = SourceKind::LocalCorpus;
  TimeWindow window;
  PromptTemplate tmpl;  // rendered with only the primary field
  std::size_t target_words = 0;
  std::size_t sample_count = 0;
  std::uint64_t seed = 0;

  // Clean windows start after release; memorised windows sit inside the
  // declared training window.
  void validate(const std::optional<ModelDates>& model = std::nullopt) const {
    if (target_words == 0) fail(Errc::ConfigError, "target_words must be >= 1");
    if (sample_count == 0) fail(Errc::ConfigError, "sample_count must be >= 1");
    if (tmpl.segments().size() != 1) {
      fail(Errc::ConfigError, "baseline template must reference exactly one field");
    }
    if (tmpl.overhead_words() >= target_words) {
      fail(Errc::ConfigError, "baseline template literals leave no room for text at target_words " +
                                  std::to_string(target_words));
    }
    if (!model) return;
    if (label == BaselineLabel::Clean && !(model->release_date < window.start())) {
      fail(Errc::ConfigError, "clean window " + window.to_string() + " must start after the model release date " +
                                  model->release_date.to_string());
    }
    if (label == BaselineLabel::Memorised && !model->training_window.contains(window)) {
      fail(Errc::ConfigError, "memorised window " + window.to_string() + " is outside the training window " +
                                  model->training_window.to_string());
    }
  }
};

struct BaselineItem {
  std::string id;
  Provenance provenance;
  std::string text;  // verbalized
  std::size_t word_count = 0;

  friend bool operator==(const BaselineItem&, const BaselineItem&) = default;
};

struct BaselineSet {
  BaselineSpec spec;
  std::vector<BaselineItem> items;

  std::vector<VerbalizedSequence> sequences() const {
    std::vector<VerbalizedSequence> out;
    out.reserve(items.size());
    for (const auto& item : items) out.push_back({item.id, item.text, item.word_count});
    return out;
  }
};

// First `target_words` whitespace words joined by single spaces.
inline std::string match_length(std::string_view text, std::size_t target_words) {
  if (target_words == 0) fail(Errc::InvalidArgument, "target_words must be >= 1");
  auto words = text::split_words(text);
  if (words.size() < target_words) {
    fail(Errc::TooShort, "text has " + std::to_string(words.size()) + " words, need " + std::to_string(target_words));
  }
  words.resize(target_words);
  return text::join(words);
}

// Arithmetic mean of word counts, rounded half up.
inline std::size_t mean_word_length(const std::vector<VerbalizedSequence>& seqs) {
  if (seqs.empty()) fail(Errc::EmptyDataset, "cannot take the mean length of an empty dataset");
  std::size_t sum = 0;
  for (const auto& s : seqs) sum += s.word_count;
  const std::size_t n = seqs.size();
  const std::size_t mean = (2 * sum + n) / (2 * n);
  if (mean == 0) fail(Errc::InvalidArgument, "benchmark sequences have no words");
  return mean;
}

// Rejects candidate texts that share any 13-word span with the benchmark
// (after whitespace normalisation) or are substrings of it, or vice versa.
class Decontaminator {
 public:
  static constexpr std::size_t kSpan = 13;

  explicit Decontaminator(const std::vector<VerbalizedSequence>& benchmark) {
    for (const auto& seq : benchmark) {
      const auto words = text::split_words(seq.text);
      for (const auto& gram : grams(words)) spans_.insert(gram);
      if (!words.empty()) normalized_.push_back(" " + text::join(words) + " ");
    }
  }

  bool overlaps(std::string_view candidate) const {
    const auto words = text::split_words(candidate);
    for (const auto& gram : grams(words)) {
      if (spans_.count(gram)) return true;
    }
    if (words.empty()) return false;
    // Space-padded so containment respects word boundaries.
    const std::string norm = " " + text::join(words) + " ";
    for (const auto& bench : normalized_) {
      if (bench.find(norm) != std::string::npos || norm.find(bench) != std::string::npos) return true;
    }
    return false;
  }

 private:
  static std::vector<std::string> grams(const std::vector<std::string>& words) {
    std::vector<std::string> out;
    if (words.size() < kSpan) return out;
    for (std::size_t i = 0; i + kSpan <= words.size(); ++i) {
      std::string g;
      for (std::size_t k = 0; k < kSpan; ++k) {
        if (k) g += ' ';
        g += words[i + k];
      }
      out.push_back(std::move(g));
    }
    return out;
  }

  std::unordered_set<std::string> spans_;
  std::vector<std::string> normalized_;
};

// Supplies candidate baseline documents. list() must be deterministic for a
// given window; load() may hit the network or a cache.
class CandidateSource {
 public:
  struct Ref {
    std::string key;
    std::optional<Date> date;  // when known before loading
  };

  virtual ~CandidateSource() = default;
  virtual SourceKind kind() const = 0;
  virtual std::vector<Ref> list(const TimeWindow& window) = 0;
  virtual Document load(const Ref& ref, const TimeWindow& window) = 0;
};

// Directory of UTF-8 text files described by a manifest:
//   [{"path": "a.txt", "created": "2023-06-14"}, ...]
// Paths are relative to the manifest's directory.
class LocalCorpus final : public CandidateSource {
 public:
  struct Entry {
    std::string path;
    Date created;
  };

  explicit LocalCorpus(const std::filesystem::path& manifest) : root_(manifest.parent_path()) {
    const auto doc = io::read_json(manifest);
    if (!doc.is_array()) fail(Errc::ConfigError, manifest.string() + " must be a JSON array");
    for (const auto& e : doc) {
      if (!e.is_object() || !e.contains("path") || !e.contains("created")) {
        fail(Errc::ConfigError, manifest.string() + ": entries need 'path' and 'created'");
      }
      entries_.push_back({e.at("path").get<std::string>(), Date::parse(e.at("created").get<std::string>())});
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) { return a.path < b.path; });
  }

  SourceKind kind() const override { return SourceKind::LocalCorpus; }

  std::vector<Ref> list(const TimeWindow& window) override {
    std::vector<Ref> out;
    for (const auto& e : entries_) {
      if (window.contains(e.created)) out.push_back({e.path, e.created});
    }
    return out;
  }

  Document load(const Ref& ref, const TimeWindow&) override {
    const auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.path == ref.key; });
    if (it == entries_.end()) fail(Errc::IoError, "'" + ref.key + "' is not in the corpus manifest");
    return Document{io::read_text(root_ / it->path), Provenance{it->path, "", it->created.to_string()}};
  }

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::filesystem::path root_;
  std::vector<Entry> entries_;
};

struct BuildStats {
  std::size_t considered = 0;
  std::size_t too_short = 0;
  std::size_t overlapping = 0;
  std::size_t outside_window = 0;
  std::size_t unavailable = 0;
};

// Draws candidates in a seeded order, truncates each to the target length
// (minus the template's literal words), drops short and overlapping ones,
// and stops at sample_count.
inline BaselineSet build_baseline(const BaselineSpec& spec, const std::vector<VerbalizedSequence>& benchmark,
                                  CandidateSource& source, BuildStats* stats_out = nullptr) {
  spec.validate();
  const Decontaminator decon(benchmark);
  const std::string field = spec.tmpl.segments().front().field;
  const std::size_t body_words = spec.target_words - spec.tmpl.overhead_words();

  auto refs = source.list(spec.window);
  auto engine = rng::stream(spec.seed, spec.label == BaselineLabel::Memorised ? 1 : 2);
  rng::shuffle(refs, engine);

  BaselineSet set{spec, {}};
  BuildStats stats;
  for (const auto& ref : refs) {
    if (set.items.size() == spec.sample_count) break;
    if (ref.date && !spec.window.contains(*ref.date)) {
      ++stats.outside_window;
      continue;
    }
    ++stats.considered;
    Document doc;
    try {
      doc = source.load(ref, spec.window);
    } catch (const Error& e) {
      if (e.code() == Errc::PageMissing || e.code() == Errc::NoRevisionBefore) {
        ++stats.unavailable;
        continue;
      }
      throw;
    }
    if (!spec.window.contains(doc.provenance.date())) {
      ++stats.outside_window;
      continue;
    }
    std::string body;
    try {
      body = match_length(doc.text, body_words);
    } catch (const Error& e) {
      if (e.code() != Errc::TooShort) throw;
      ++stats.too_short;
      continue;
    }
    if (decon.overlaps(body)) {
      ++stats.overlapping;
      continue;
    }
    char id[64];
    std::snprintf(id, sizeof id, "%s-%04zu", std::string(to_string(spec.label)).c_str(), set.items.size());
    BenchmarkSample sample{id, spec.tmpl.format(), {{field, body}}};
    auto seq = verbalize(sample, spec.tmpl);
    if (seq.word_count != spec.target_words) {
      fail(Errc::InvalidArgument, "template rendering changed the word count of '" + seq.sample_id + "'");
    }
    set.items.push_back({seq.sample_id, doc.provenance, std::move(seq.text), seq.word_count});
  }
  if (stats_out) *stats_out = stats;
  if (set.items.size() < spec.sample_count) {
    fail(Errc::InsufficientPages,
         std::string(to_string(spec.label)) + " baseline: " + std::to_string(set.items.size()) + " of " +
             std::to_string(spec.sample_count) + " items qualified in " + spec.window.to_string() + " (" +
             std::to_string(refs.size()) + " candidates, " + std::to_string(stats.too_short) + " too short, " +
             std::to_string(stats.overlapping) + " overlapping the benchmark, " +
             std::to_string(stats.outside_window) + " outside the window, " + std::to_string(stats.unavailable) +
             " unavailable)");
  }
  return set;
}

inline constexpr int kBaselineFileVersion = 1;

inline nlohmann::json to_json(const Provenance& p) {
  return {{"source", p.source}, {"revision_id", p.revision_id}, {"timestamp", p.timestamp}};
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  return {j.at("source").get<std::string>(), j.at("revision_id").get<std::string>(),
          j.at("timestamp").get<std::string>()};
}

inline nlohmann::json to_json(const BaselineSpec& s) {
  return {{"label", to_string(s.label)},
          {"source", to_string(s.source)},
          {"window", {{"start", s.window.start().to_string()}, {"end", s.window.end().to_string()}}},
          {"format", to_string(s.tmpl.format())},
          {"template", s.tmpl.pattern()},
          {"target_words", s.target_words},
          {"sample_count", s.sample_count},
          {"seed", s.seed}};
}

inline BaselineSpec baseline_spec_from_json(const nlohmann::json& j) {
  const Format f = parse_format(j.at("format").get<std::string>());
  return BaselineSpec{parse_label(j.at("label").get<std::string>()),
                      parse_source(j.at("source").get<std::string>()),
                      TimeWindow::parse(j.at("window").at("start").get<std::string>(),
                                        j.at("window").at("end").get<std::string>()),
                      PromptTemplate::parse(f, j.at("template").get<std::string>()),
                      j.at("target_words").get<std::size_t>(),
                      j.at("sample_count").get<std::size_t>(),
                      j.at("seed").get<std::uint64_t>()};
}

inline nlohmann::json to_json(const BaselineSet& set) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& item : set.items) {
    items.push_back({{"id", item.id},
                     {"provenance", to_json(item.provenance)},
                     {"text", item.text},
                     {"word_count", item.word_count}});
  }
  return {{"format", "contam-baseline"}, {"version", kBaselineFileVersion}, {"spec", to_json(set.spec)},
          {"items", items}};
}

inline BaselineSet baseline_set_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "contam-baseline") fail(Errc::FormatVersion, "not a baseline document");
  if (j.value("version", 0) != kBaselineFileVersion) fail(Errc::FormatVersion, "unsupported baseline version");
  BaselineSet set{baseline_spec_from_json(j.at("spec")), {}};
  for (const auto& item : j.at("items")) {
    set.items.push_back({item.at("id").get<std::string>(), provenance_from_json(item.at("provenance")),
                         item.at("text").get<std::string>(), item.at("word_count").get<std::size_t>()});
  }
  return set;
}

}  // namespace contam
