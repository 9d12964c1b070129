#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/analysis.hpp"
#include "contam/baselines.hpp"
#include "contam/date.hpp"
#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/remote.hpp"
#include "contam/reporting.hpp"
#include "contam/text.hpp"
#include "contam/verbalizer.hpp"

namespace contam {

namespace fs = std::filesystem;

// Benchmark presets: format, field policy and target length for the three
// benchmark families, plus clean-baseline windows after mid-2023.
inline const std::map<std::string, nlohmann::json>& benchmark_presets() {
  static const std::map<std::string, nlohmann::json> presets{
      {"rc-wikipedia",
       {{"benchmark", {{"format", "ReadingComprehension"}, {"fields", {"context"}}, {"target_words", 107}}},
        {"baselines",
         {{"memorised", {{"source", "WikipediaRevisions"}}},
          {"clean", {{"source", "WikipediaRevisions"}, {"window", {{"start", "2023-06-01"}, {"end", "2023-07-31"}}}}}}}}},
      {"summarisation",
       {{"benchmark", {{"format", "Summarisation"}, {"fields", {"document", "summary"}}, {"target_words", 358}}},
        {"baselines",
         {{"memorised", {{"source", "LocalCorpus"}}},
          {"clean", {{"source", "LocalCorpus"}, {"window", {{"start", "2023-06-01"}, {"end", "2023-06-30"}}}}}}}}},
      {"multichoice",
       {{"benchmark",
         {{"format", "MultiChoice"}, {"fields", {"question", "choices", "answer"}}, {"target_words", "infer"}}},
        {"baselines", {{"memorised", {{"source", "LocalCorpus"}}}, {"clean", {{"source", "LocalCorpus"}}}}}}},
  };
  return presets;
}

// Declared training windows and release dates of the audited model families.
inline const std::map<std::string, nlohmann::json>& model_presets() {
  static const std::map<std::string, nlohmann::json> presets{
      {"gpt-3",
       {{"name", "gpt-3"},
        {"release_date", "2020-06-11"},
        {"training_window", {{"start", "2016-01-01"}, {"end", "2019-12-31"}}}}},
      {"llama",
       {{"name", "llama"},
        {"release_date", "2023-02-24"},
        {"training_window", {{"start", "2022-06-01"}, {"end", "2022-08-31"}}}}},
  };
  return presets;
}

enum class BackendChoice { Ngram, Remote };

struct BaselineSourceConfig {
  BaselineLabel label = BaselineLabel::Clean;
  SourceKind source = SourceKind::LocalCorpus;
  TimeWindow window{Date{}, Date{}};
  std::size_t sample_count = 50;
  fs::path manifest;                // LocalCorpus
  std::string wiki = "https://en.wikipedia.org";
  std::vector<std::string> titles;  // WikipediaRevisions, memorised
};

struct AuditConfig {
  fs::path base_dir;
  std::string name = "benchmark";

  fs::path benchmark_path;
  Format format = Format::RawText;
  FieldPolicy fields;
  PromptTemplate tmpl = builtin_template(Format::RawText);
  std::optional<std::size_t> target_words;  // empty = infer from benchmark

  std::string model_name;
  Date release_date;
  TimeWindow training_window{Date{}, Date{}};
  BackendChoice backend = BackendChoice::Ngram;
  fs::path model_file;
  std::string endpoint;
  std::string api_key_env;
  std::size_t max_context_tokens = 0;
  std::size_t max_in_flight = 4;
  bool lenient = false;
  std::size_t max_consecutive_failures = 10;

  std::uint64_t seed = 0;
  std::size_t resample = 1;
  BaselineSourceConfig memorised;
  BaselineSourceConfig clean;

  Thresholds thresholds;
  std::size_t bootstrap_iterations = 10000;

  fs::path output_dir;
  std::vector<ReportFormat> output_formats{ReportFormat::Json, ReportFormat::Csv, ReportFormat::Markdown};
  fs::path cache_dir;
  bool offline = false;
  RetryPolicy retry;
  std::chrono::milliseconds politeness{200};
  std::chrono::seconds timeout{60};

  // Resolved JSON after preset merging and overrides; the fingerprint is
  // computed from its semantic subset.
  nlohmann::json resolved;

  ModelDates model_dates() const { return ModelDates{release_date, training_window}; }

  BaselineSpec baseline_spec(BaselineLabel label, std::size_t target, std::size_t resample_index = 0) const {
    const auto& src = label == BaselineLabel::Memorised ? memorised : clean;
    return BaselineSpec{label,
                        src.source,
                        src.window,
                        tmpl.restricted({primary_field(format)}),
                        target,
                        src.sample_count,
                        seed + resample_index};
  }
};

namespace detail {

inline TimeWindow window_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("start") || !j.contains("end")) {
    fail(Errc::ConfigError, where + " needs 'start' and 'end'");
  }
  try {
    return TimeWindow::parse(j.at("start").get<std::string>(), j.at("end").get<std::string>());
  } catch (const Error& e) {
    fail(Errc::ConfigError, where + ": " + e.detail());
  }
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string file_digest(const fs::path& p) {
  if (p.empty() || !fs::exists(p)) return "";
  return text::hex64(text::fnv1a64(io::read_text(p)));
}

}  // namespace detail

// Merges presets under the user's document and applies `overrides` last
// (JSON merge patch semantics).
inline nlohmann::json resolve_config_json(const nlohmann::json& user, const nlohmann::json& overrides = {}) {
  if (!user.is_object()) fail(Errc::ConfigError, "config must be a JSON object");
  nlohmann::json merged = nlohmann::json::object();
  if (user.contains("preset")) {
    const auto name = user.at("preset").get<std::string>();
    const auto it = benchmark_presets().find(name);
    if (it == benchmark_presets().end()) fail(Errc::ConfigError, "unknown preset '" + name + "'");
    merged.merge_patch(it->second);
  }
  if (user.contains("model") && user["model"].contains("preset")) {
    const auto name = user["model"]["preset"].get<std::string>();
    const auto it = model_presets().find(name);
    if (it == model_presets().end()) fail(Errc::ConfigError, "unknown model preset '" + name + "'");
    merged.merge_patch({{"model", it->second}});
  }
  merged.merge_patch(user);
  if (!overrides.is_null()) merged.merge_patch(overrides);
  return merged;
}

inline BaselineSourceConfig parse_baseline_source(const nlohmann::json& j, BaselineLabel label,
                                                  const TimeWindow& default_window, const fs::path& base) {
  BaselineSourceConfig s;
  s.label = label;
  const std::string where = "baselines." + std::string(to_string(label));
  if (!j.contains("source")) fail(Errc::ConfigError, where + ".source is required");
  try {
    s.source = parse_source(j.at("source").get<std::string>());
  } catch (const Error& e) {
    fail(Errc::ConfigError, where + ": " + e.detail());
  }
  if (j.contains("window")) {
    s.window = detail::window_from_json(j.at("window"), where + ".window");
  } else if (label == BaselineLabel::Memorised) {
    s.window = default_window;
  } else {
    fail(Errc::ConfigError, where + ".window is required");
  }
  const auto count = j.value("sample_count", 50LL);
  if (count < 1) fail(Errc::ConfigError, where + ".sample_count must be >= 1");
  s.sample_count = static_cast<std::size_t>(count);
  if (s.source == SourceKind::LocalCorpus) {
    if (!j.contains("manifest")) fail(Errc::ConfigError, where + ".manifest is required for LocalCorpus");
    s.manifest = detail::resolve(base, j.at("manifest").get<std::string>());
  } else {
    s.wiki = j.value("wiki", s.wiki);
    if (j.contains("titles")) s.titles = j.at("titles").get<std::vector<std::string>>();
    if (j.contains("titles_file")) {
      const auto content = io::read_text(detail::resolve(base, j.at("titles_file").get<std::string>()));
      std::istringstream in(content);
      std::string line;
      while (std::getline(in, line)) {
        const auto t = text::normalize_whitespace(line);
        if (!t.empty()) s.titles.push_back(t);
      }
    }
    if (label == BaselineLabel::Memorised && s.titles.empty()) {
      fail(Errc::ConfigError, where + " from WikipediaRevisions needs 'titles' or 'titles_file'");
    }
  }
  return s;
}

// Parses and validates a resolved config. Everything checkable without I/O
// against remote services is checked here, so invalid configs fail before
// any network traffic.
inline AuditConfig parse_config(const nlohmann::json& resolved, const fs::path& base_dir) {
  AuditConfig c;
  c.base_dir = base_dir;
  c.resolved = resolved;
  try {
    c.name = resolved.value("name", c.name);

    if (!resolved.contains("benchmark")) fail(Errc::ConfigError, "missing 'benchmark' section");
    const auto& b = resolved.at("benchmark");
    if (!b.contains("path")) fail(Errc::ConfigError, "benchmark.path is required");
    c.benchmark_path = detail::resolve(base_dir, b.at("path").get<std::string>());
    c.format = parse_format(b.value("format", "RawText"));
    c.tmpl = builtin_template(c.format);
    if (b.contains("template_file")) {
      const auto overrides = parse_template_overrides(io::read_json(detail::resolve(base_dir, b.at("template_file").get<std::string>())));
      if (const auto it = overrides.find(c.format); it != overrides.end()) c.tmpl = it->second;
    }
    if (b.contains("template")) c.tmpl = PromptTemplate::parse(c.format, b.at("template").get<std::string>());
    if (b.contains("fields")) {
      for (const auto& f : b.at("fields")) c.fields.insert(f.get<std::string>());
    } else {
      c.fields = c.tmpl.field_policy();
    }
    if (c.fields.empty()) fail(Errc::ConfigError, "benchmark.fields is empty");
    c.tmpl.restricted(c.fields);
    if (!c.fields.count(primary_field(c.format))) {
      fail(Errc::ConfigError, "benchmark.fields must include '" + primary_field(c.format) + "' to host baseline text");
    }
    if (b.contains("target_words") && !(b["target_words"].is_string() && b["target_words"] == "infer")) {
      const auto t = b.at("target_words").get<long long>();
      if (t < 1) fail(Errc::ConfigError, "benchmark.target_words must be >= 1");
      c.target_words = static_cast<std::size_t>(t);
    }

    if (!resolved.contains("model")) fail(Errc::ConfigError, "missing 'model' section");
    const auto& m = resolved.at("model");
    c.model_name = m.value("name", "");
    if (!m.contains("release_date")) fail(Errc::ConfigError, "model.release_date is required");
    c.release_date = Date::parse(m.at("release_date").get<std::string>());
    if (!m.contains("training_window")) fail(Errc::ConfigError, "model.training_window is required");
    c.training_window = detail::window_from_json(m.at("training_window"), "model.training_window");
    if (!(c.training_window.end() <= c.release_date)) {
      fail(Errc::ConfigError, "model.training_window must end on or before the release date");
    }
    const std::string backend = m.value("backend", "ngram");
    if (backend == "ngram") {
      c.backend = BackendChoice::Ngram;
      if (!m.contains("model_file")) fail(Errc::ConfigError, "model.model_file is required for the ngram backend");
      c.model_file = detail::resolve(base_dir, m.at("model_file").get<std::string>());
    } else if (backend == "remote") {
      c.backend = BackendChoice::Remote;
      c.endpoint = m.value("endpoint", "");
      if (c.endpoint.empty()) fail(Errc::ConfigError, "model.endpoint is required for the remote backend");
      if (c.model_name.empty()) fail(Errc::ConfigError, "model.name is required for the remote backend");
      c.api_key_env = m.value("api_key_env", "");
    } else {
      fail(Errc::ConfigError, "model.backend must be 'ngram' or 'remote'");
    }
    c.max_context_tokens = m.value("max_context_tokens", std::size_t{0});
    c.max_in_flight = m.value("max_in_flight", c.max_in_flight);
    if (c.max_in_flight == 0) fail(Errc::ConfigError, "model.max_in_flight must be >= 1");
    c.lenient = m.value("lenient", false);
    c.max_consecutive_failures = m.value("max_consecutive_failures", c.max_consecutive_failures);

    if (!resolved.contains("baselines")) fail(Errc::ConfigError, "missing 'baselines' section");
    const auto& bl = resolved.at("baselines");
    if (!bl.contains("seed")) fail(Errc::ConfigError, "baselines.seed is required");
    c.seed = bl.at("seed").get<std::uint64_t>();
    const auto resample = bl.value("resample", 1LL);
    if (resample < 1) fail(Errc::ConfigError, "baselines.resample must be >= 1");
    c.resample = static_cast<std::size_t>(resample);
    if (!bl.contains("memorised") || !bl.contains("clean")) {
      fail(Errc::ConfigError, "baselines.memorised and baselines.clean are required");
    }
    c.memorised = parse_baseline_source(bl.at("memorised"), BaselineLabel::Memorised, c.training_window, base_dir);
    c.clean = parse_baseline_source(bl.at("clean"), BaselineLabel::Clean, c.training_window, base_dir);

    if (resolved.contains("analysis")) {
      const auto& a = resolved.at("analysis");
      if (a.contains("thresholds")) {
        c.thresholds.low = a["thresholds"].value("low", c.thresholds.low);
        c.thresholds.high = a["thresholds"].value("high", c.thresholds.high);
      }
      c.bootstrap_iterations = a.value("bootstrap_iterations", c.bootstrap_iterations);
    }
    c.thresholds.validate();

    if (resolved.contains("output")) {
      const auto& o = resolved.at("output");
      c.output_dir = detail::resolve(base_dir, o.value("dir", ""));
      if (o.contains("formats")) {
        c.output_formats.clear();
        for (const auto& f : o.at("formats")) c.output_formats.push_back(parse_report_format(f.get<std::string>()));
      }
    }
    if (c.output_dir.empty()) c.output_dir = base_dir / "out";
    c.cache_dir = detail::resolve(base_dir, resolved.value("cache_dir", ""));
    c.offline = resolved.value("offline", false);
    if (resolved.contains("network")) {
      const auto& n = resolved.at("network");
      c.retry.max_attempts = n.value("max_attempts", c.retry.max_attempts);
      if (c.retry.max_attempts < 1) fail(Errc::ConfigError, "network.max_attempts must be >= 1");
      c.retry.base_delay = std::chrono::milliseconds(n.value("base_delay_ms", c.retry.base_delay.count()));
      c.retry.max_delay = std::chrono::milliseconds(n.value("max_delay_ms", c.retry.max_delay.count()));
      c.politeness = std::chrono::milliseconds(n.value("politeness_ms", c.politeness.count()));
      c.timeout = std::chrono::seconds(n.value("timeout_s", c.timeout.count()));
    }

    // Window invariants, checked against a placeholder target length.
    const ModelDates dates = c.model_dates();
    for (auto label : {BaselineLabel::Memorised, BaselineLabel::Clean}) {
      c.baseline_spec(label, c.target_words.value_or(1000000)).validate(dates);
    }
  } catch (const Error& e) {
    if (e.code() == Errc::ConfigError || e.code() == Errc::InvalidThresholds) throw;
    throw Error(Errc::ConfigError, e.detail());
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ConfigError, std::string("malformed config: ") + e.what());
  }
  return c;
}

inline AuditConfig load_config(const fs::path& path, const nlohmann::json& overrides = {}) {
  nlohmann::json user;
  try {
    user = io::read_json(path);
  } catch (const Error& e) {
    fail(Errc::ConfigError, e.detail());
  }
  return parse_config(resolve_config_json(user, overrides), path.parent_path());
}

// Hash of every field that can change the report: benchmark and model file
// contents, format, template, baselines, thresholds and bootstrap settings.
// Output locations, cache paths, network tuning, concurrency and offline
// mode are excluded.
inline std::string config_fingerprint(const AuditConfig& c) {
  nlohmann::json baselines = nlohmann::json::object();
  for (const BaselineSourceConfig* s : {&c.memorised, &c.clean}) {
    baselines[std::string(to_string(s->label))] = {
        {"source", to_string(s->source)},
        {"window", s->window.to_string()},
        {"sample_count", s->sample_count},
        {"corpus", s->source == SourceKind::LocalCorpus ? detail::file_digest(s->manifest) : s->wiki},
        {"titles", s->titles}};
  }
  const nlohmann::json semantic = {
      {"name", c.name},
      {"benchmark",
       {{"content", detail::file_digest(c.benchmark_path)},
        {"format", to_string(c.format)},
        {"fields", c.fields},
        {"template", c.tmpl.pattern()},
        {"target_words", c.target_words ? nlohmann::json(*c.target_words) : nlohmann::json("infer")}}},
      {"model",
       {{"name", c.model_name},
        {"release_date", c.release_date.to_string()},
        {"training_window", c.training_window.to_string()},
        {"backend", c.backend == BackendChoice::Ngram ? "ngram" : "remote"},
        {"model_file", detail::file_digest(c.model_file)},
        {"endpoint", c.endpoint},
        {"max_context_tokens", c.max_context_tokens}}},
      {"baselines", baselines},
      {"seed", c.seed},
      {"resample", c.resample},
      {"analysis",
       {{"low", c.thresholds.low}, {"high", c.thresholds.high}, {"bootstrap_iterations", c.bootstrap_iterations}}},
  };
  return text::hex64(text::fnv1a64(semantic.dump()));
}

}  // namespace contam
