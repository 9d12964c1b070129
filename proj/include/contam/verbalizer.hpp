#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/text.hpp"

namespace contam {

enum class Format { ReadingComprehension, Summarisation, MultiChoice, RawText };

inline std::string_view to_string(Format f) {
  switch (f) {
    case Format::ReadingComprehension: return "ReadingComprehension";
    case Format::Summarisation: return "Summarisation";
    case Format::MultiChoice: return "MultiChoice";
    case Format::RawText: return "RawText";
  }
  return "RawText";
}

inline Format parse_format(std::string_view s) {
  for (Format f : {Format::ReadingComprehension, Format::Summarisation, Format::MultiChoice, Format::RawText}) {
    if (s == to_string(f)) return f;
  }
  fail(Errc::InvalidArgument, "unknown benchmark format '" + std::string(s) + "'");
}

// Field that receives baseline text when a baseline is rendered through a
// benchmark template.
inline std::string primary_field(Format f) {
  switch (f) {
    case Format::ReadingComprehension: return "context";
    case Format::Summarisation: return "document";
    case Format::MultiChoice: return "question";
    case Format::RawText: return "text";
  }
  return "text";
}

using FieldPolicy = std::set<std::string>;

struct BenchmarkSample {
  std::string id;
  Format format = Format::RawText;
  std::vector<std::pair<std::string, std::string>> fields;

  const std::string* find(std::string_view name) const {
    for (const auto& [key, value] : fields) {
      if (key == name) return &value;
    }
    return nullptr;
  }

  friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct VerbalizedSequence {
  std::string sample_id;
  std::string text;
  std::size_t word_count = 0;

  friend bool operator==(const VerbalizedSequence&, const VerbalizedSequence&) = default;
};

inline VerbalizedSequence make_sequence(std::string sample_id, std::string text) {
  const std::size_t words = text::count_words(text);
  if (words == 0) fail(Errc::EmptySequence, "sample '" + sample_id + "' verbalized to empty text");
  return VerbalizedSequence{std::move(sample_id), std::move(text), words};
}

// A pattern is a list of (literal, field) segments followed by a trailing
// literal. "Title: {title}; Context: {context}" has segments
// ("Title: ", title), ("; Context: ", context) and an empty tail.
class PromptTemplate {
 public:
  struct Segment {
    std::string literal;
    std::string field;
    friend bool operator==(const Segment&, const Segment&) = default;
  };

  PromptTemplate(Format format, std::vector<Segment> segments, std::string tail)
      : format_(format), segments_(std::move(segments)), tail_(std::move(tail)) {
    for (const auto& seg : segments_) {
      if (seg.field.empty()) fail(Errc::InvalidArgument, "template segment with empty field name");
      policy_.insert(seg.field);
    }
    if (segments_.empty()) fail(Errc::InvalidArgument, "template has no {field} placeholders");
  }

  // Parses "{field}" placeholders. "{{" and "}}" are literal braces.
  static PromptTemplate parse(Format format, std::string_view pattern) {
    std::vector<Segment> segments;
    std::string literal;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
      const char c = pattern[i];
      if (c == '{' && i + 1 < pattern.size() && pattern[i + 1] == '{') {
        literal += '{';
        ++i;
      } else if (c == '}' && i + 1 < pattern.size() && pattern[i + 1] == '}') {
        literal += '}';
        ++i;
      } else if (c == '{') {
        const auto close = pattern.find('}', i + 1);
        if (close == std::string_view::npos) {
          fail(Errc::InvalidArgument, "unterminated placeholder in template '" + std::string(pattern) + "'");
        }
        segments.push_back({std::move(literal), std::string(pattern.substr(i + 1, close - i - 1))});
        literal.clear();
        i = close;
      } else if (c == '}') {
        fail(Errc::InvalidArgument, "unbalanced '}' in template '" + std::string(pattern) + "'");
      } else {
        literal += c;
      }
    }
    return PromptTemplate(format, std::move(segments), std::move(literal));
  }

  Format format() const { return format_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::string& tail() const { return tail_; }
  const FieldPolicy& field_policy() const { return policy_; }

  std::string pattern() const {
    const auto escape = [](const std::string& s) {
      std::string out;
      for (char c : s) {
        if (c == '{' || c == '}') out += c;
        out += c;
      }
      return out;
    };
    std::string out;
    for (const auto& seg : segments_) out += escape(seg.literal) + "{" + seg.field + "}";
    return out + escape(tail_);
  }

  // Drops segments whose field is outside `policy`. When the leading segment
  // is dropped, separator characters at the start of the new first literal
  // are trimmed so "; Context: " becomes "Context: ".
  PromptTemplate restricted(const FieldPolicy& policy) const {
    std::vector<Segment> kept;
    bool dropped_leading = false;
    for (const auto& seg : segments_) {
      if (policy.count(seg.field)) {
        kept.push_back(seg);
      } else if (kept.empty()) {
        dropped_leading = true;
      }
    }
    if (kept.empty()) fail(Errc::InvalidArgument, "field policy removes every template field");
    if (dropped_leading) {
      auto& lit = kept.front().literal;
      const auto first = lit.find_first_not_of(" \t;,|");
      lit = first == std::string::npos ? std::string{} : lit.substr(first);
    }
    return PromptTemplate(format_, std::move(kept), tail_);
  }

  // Words the rendering adds beyond the field values, measured by rendering
  // every field as a single word. Exact for templates whose field values
  // carry no leading or trailing whitespace.
  std::size_t overhead_words() const {
    std::string probe;
    for (const auto& seg : segments_) probe += seg.literal + "x";
    const std::size_t words = text::count_words(probe + tail_);
    return words > segments_.size() ? words - segments_.size() : 0;
  }

  std::string render(const BenchmarkSample& sample) const {
    std::string out;
    for (const auto& seg : segments_) {
      const std::string* value = sample.find(seg.field);
      if (value == nullptr || value->empty()) {
        fail(Errc::MissingField, "sample '" + sample.id + "' lacks field '" + seg.field + "'");
      }
      out += seg.literal;
      out += *value;
    }
    return out + tail_;
  }

  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;

 private:
  Format format_;
  std::vector<Segment> segments_;
  std::string tail_;
  FieldPolicy policy_;
};

inline PromptTemplate builtin_template(Format format) {
  switch (format) {
    case Format::ReadingComprehension:
      return PromptTemplate::parse(format, "Title: {title}; Context: {context}; Question: {question}; Answer: {answers}");
    case Format::Summarisation:
      return PromptTemplate::parse(format, "Document: {document} Summary: {summary}");
    case Format::MultiChoice:
      return PromptTemplate::parse(format, "Question: {question} Choices: {choices} Answer: {answer}");
    case Format::RawText:
      return PromptTemplate::parse(format, "{text}");
  }
  return PromptTemplate::parse(Format::RawText, "{text}");
}

// Template override document: {"ReadingComprehension": "Passage: {context}", ...}
inline std::map<Format, PromptTemplate> parse_template_overrides(const nlohmann::json& doc) {
  if (!doc.is_object()) fail(Errc::ConfigError, "template override file must be a JSON object");
  std::map<Format, PromptTemplate> out;
  for (const auto& [name, pattern] : doc.items()) {
    if (!pattern.is_string()) fail(Errc::ConfigError, "template for '" + name + "' must be a string");
    const Format f = parse_format(name);
    out.insert_or_assign(f, PromptTemplate::parse(f, pattern.get<std::string>()));
  }
  return out;
}

inline BenchmarkSample select_fields(const BenchmarkSample& sample, const FieldPolicy& policy) {
  for (const auto& name : policy) {
    const std::string* value = sample.find(name);
    if (value == nullptr || value->empty()) {
      fail(Errc::MissingField, "sample '" + sample.id + "' lacks field '" + name + "'");
    }
  }
  BenchmarkSample out{sample.id, sample.format, {}};
  for (const auto& field : sample.fields) {
    if (policy.count(field.first)) out.fields.push_back(field);
  }
  return out;
}

inline VerbalizedSequence verbalize(const BenchmarkSample& sample, const PromptTemplate& tmpl) {
  if (sample.format != tmpl.format()) {
    fail(Errc::FormatMismatch, "sample '" + sample.id + "' is " + std::string(to_string(sample.format)) +
                                   " but template is " + std::string(to_string(tmpl.format())));
  }
  return make_sequence(sample.id, tmpl.render(sample));
}

struct VerbalizeOutcome {
  std::vector<VerbalizedSequence> sequences;
  std::vector<std::pair<std::string, std::string>> errors;  // (sample id, message)
};

// Applies `policy` to every sample and renders it with `tmpl` restricted to
// the policy. Strict mode throws on the first failure, naming the sample.
inline VerbalizeOutcome verbalize_dataset(const std::vector<BenchmarkSample>& samples, const PromptTemplate& tmpl,
                                          const FieldPolicy& policy, bool lenient = false) {
  VerbalizeOutcome out;
  if (samples.empty()) return out;
  const PromptTemplate effective = tmpl.restricted(policy);
  std::set<std::string> seen;
  for (const auto& sample : samples) {
    try {
      if (sample.id.empty()) fail(Errc::InvalidArgument, "sample with empty id");
      if (!seen.insert(sample.id).second) fail(Errc::InvalidArgument, "duplicate sample id '" + sample.id + "'");
      out.sequences.push_back(verbalize(select_fields(sample, policy), effective));
    } catch (const Error& e) {
      if (!lenient) throw Error(e.code(), "sample '" + sample.id + "': " + e.detail());
      out.errors.emplace_back(sample.id, e.what());
    }
  }
  return out;
}

// Converts one JSON field value to text: strings verbatim, arrays joined with
// "; ", objects through their "text" member when present.
template <typename Json>
std::string field_text(const Json& v) {
  if (v.is_string()) return v.template get<std::string>();
  if (v.is_null()) return {};
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& el : v) {
      auto part = field_text(el);
      if (!part.empty()) parts.push_back(std::move(part));
    }
    return text::join(parts, "; ");
  }
  if (v.is_object() && v.contains("text")) return field_text(v.at("text"));
  return v.dump();
}

template <typename Json>
BenchmarkSample sample_from_json(const Json& record, Format format) {
  if (!record.is_object()) fail(Errc::InvalidArgument, "benchmark record is not a JSON object");
  if (!record.contains("id")) fail(Errc::MissingField, "benchmark record without 'id'");
  BenchmarkSample s;
  const auto& id = record.at("id");
  s.id = id.is_string() ? id.template get<std::string>() : id.dump();
  s.format = format;
  for (const auto& [key, value] : record.items()) {
    if (key == "id") continue;
    s.fields.emplace_back(key, field_text(value));
  }
  return s;
}

// Newline-delimited JSON, one record per line; blank lines are skipped.
inline std::vector<BenchmarkSample> parse_benchmark(std::string_view ndjson, Format format) {
  std::vector<BenchmarkSample> out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(ndjson)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::count_words(line) == 0) continue;
    // Keys are kept in file order so field order follows the record.
    nlohmann::ordered_json record;
    try {
      record = nlohmann::ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::InvalidArgument, "line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(sample_from_json(record, format));
  }
  return out;
}

inline std::vector<BenchmarkSample> load_benchmark(const std::filesystem::path& path, Format format) {
  return parse_benchmark(io::read_text(path), format);
}

inline constexpr int kSequenceFileVersion = 1;

inline nlohmann::json to_json(const VerbalizedSequence& s) {
  return {{"format_version", kSequenceFileVersion}, {"sample_id", s.sample_id}, {"text", s.text},
          {"word_count", s.word_count}};
}

inline std::string to_ndjson(const std::vector<VerbalizedSequence>& seqs) {
  std::string out;
  for (const auto& s : seqs) out += to_json(s).dump() + "\n";
  return out;
}

inline std::vector<VerbalizedSequence> parse_sequences(std::string_view ndjson) {
  std::vector<VerbalizedSequence> out;
  std::istringstream in{std::string(ndjson)};
  std::string line;
  while (std::getline(in, line)) {
    if (text::count_words(line) == 0) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::IoError, std::string("malformed sequence record: ") + e.what());
    }
    if (j.value("format_version", 0) != kSequenceFileVersion) {
      fail(Errc::FormatVersion, "sequence record has unsupported format_version");
    }
    auto seq = make_sequence(j.at("sample_id").get<std::string>(), j.at("text").get<std::string>());
    if (seq.word_count != j.at("word_count").get<std::size_t>()) {
      fail(Errc::IoError, "sequence '" + seq.sample_id + "' has inconsistent word_count");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

}  // namespace contam
