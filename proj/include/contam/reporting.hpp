#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/analysis.hpp"
#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/scorer.hpp"

namespace contam {

inline constexpr int kReportSchemaVersion = 1;

namespace detail {

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  return nlohmann::json(v).dump();
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const PerplexityResult& r) {
  return {{"sample_id", r.sample_id},
          {"bits_per_token", r.bits_per_token},
          {"n_tokens", r.n_tokens},
          {"word_count", r.word_count},
          {"provenance", r.provenance}};
}

inline PerplexityResult perplexity_result_from_json(const nlohmann::json& j) {
  return {j.at("sample_id").get<std::string>(), j.at("bits_per_token").get<double>(),
          j.at("n_tokens").get<std::size_t>(), j.at("word_count").get<std::size_t>(),
          j.at("provenance").get<std::string>()};
}

inline nlohmann::json to_json(const AggregateResult& a) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& r : a.per_sample) per.push_back(to_json(r));
  return {{"label", to_string(a.label)}, {"mean_bits", a.mean_bits}, {"ci_low", a.ci_low},
          {"ci_high", a.ci_high},        {"n", a.n},                 {"per_sample", per}};
}

inline AggregateResult aggregate_from_json(const nlohmann::json& j) {
  AggregateResult a;
  a.label = parse_set_label(j.at("label").get<std::string>());
  a.mean_bits = j.at("mean_bits").get<double>();
  a.ci_low = j.at("ci_low").get<double>();
  a.ci_high = j.at("ci_high").get<double>();
  a.n = j.at("n").get<std::size_t>();
  for (const auto& r : j.at("per_sample")) a.per_sample.push_back(perplexity_result_from_json(r));
  return a;
}

inline nlohmann::json to_json(const ContaminationReport& r) {
  return {{"schema_version", kReportSchemaVersion},
          {"tool_version", r.tool_version},
          {"config_fingerprint", r.config_fingerprint},
          {"benchmark_name", r.benchmark_name},
          {"benchmark", to_json(r.benchmark)},
          {"memorised", to_json(r.memorised)},
          {"clean", to_json(r.clean)},
          {"score", r.score ? nlohmann::json(*r.score) : nlohmann::json(nullptr)},
          {"verdict", to_string(r.verdict)},
          {"thresholds", {{"low", r.thresholds.low}, {"high", r.thresholds.high}}},
          {"bootstrap", {{"iterations", r.bootstrap_iterations}, {"seed", r.seed}, {"confidence", kConfidence}}},
          {"caveats", r.caveats}};
}

inline ContaminationReport report_from_json(const nlohmann::json& j) {
  if (j.value("schema_version", 0) != kReportSchemaVersion) {
    fail(Errc::FormatVersion, "unsupported report schema_version");
  }
  ContaminationReport r;
  r.tool_version = j.at("tool_version").get<std::string>();
  r.config_fingerprint = j.at("config_fingerprint").get<std::string>();
  r.benchmark_name = j.at("benchmark_name").get<std::string>();
  r.benchmark = aggregate_from_json(j.at("benchmark"));
  r.memorised = aggregate_from_json(j.at("memorised"));
  r.clean = aggregate_from_json(j.at("clean"));
  if (!j.at("score").is_null()) r.score = j.at("score").get<double>();
  r.verdict = parse_verdict(j.at("verdict").get<std::string>());
  r.thresholds = {j.at("thresholds").at("low").get<double>(), j.at("thresholds").at("high").get<double>()};
  r.bootstrap_iterations = j.at("bootstrap").at("iterations").get<std::size_t>();
  r.seed = j.at("bootstrap").at("seed").get<std::uint64_t>();
  r.caveats = j.at("caveats").get<std::vector<std::string>>();
  return r;
}

// One row per (label, sample).
inline std::string report_csv(const ContaminationReport& r) {
  std::string out = "label,sample_id,bits_per_token,word_count,provenance\n";
  for (const AggregateResult* a : {&r.benchmark, &r.memorised, &r.clean}) {
    for (const auto& s : a->per_sample) {
      out += std::string(to_string(a->label)) + "," + detail::csv_field(s.sample_id) + "," +
             detail::format_double(s.bits_per_token) + "," + std::to_string(s.word_count) + "," +
             detail::csv_field(s.provenance) + "\n";
    }
  }
  return out;
}

inline std::string report_markdown(const ContaminationReport& r) {
  std::ostringstream md;
  md << "# Contamination report: " << r.benchmark_name << "\n\n";
  md << "| set | n | mean bits/token | 95% CI |\n|---|---:|---:|---|\n";
  for (const AggregateResult* a : {&r.benchmark, &r.memorised, &r.clean}) {
    md << "| " << to_string(a->label) << " | " << a->n << " | " << detail::fixed(a->mean_bits, 4) << " | ["
       << detail::fixed(a->ci_low, 4) << ", " << detail::fixed(a->ci_high, 4) << "] |\n";
  }
  md << "\n";
  md << "- score: " << (r.score ? detail::fixed(*r.score, 4) : std::string("n/a")) << "\n";
  md << "- verdict: **" << to_string(r.verdict) << "**\n";
  md << "- thresholds: low " << detail::fixed(r.thresholds.low, 2) << ", high " << detail::fixed(r.thresholds.high, 2)
     << "\n";
  md << "- bootstrap: " << r.bootstrap_iterations << " iterations, seed " << r.seed << "\n";
  md << "- config fingerprint: `" << r.config_fingerprint << "`\n";
  md << "- tool version: " << r.tool_version << "\n";
  if (!r.caveats.empty()) {
    md << "\n## Caveats\n\n";
    for (const auto& c : r.caveats) md << "- " << c << "\n";
  }
  return md.str();
}

// Grouped-bar data: one row per (benchmark, series).
inline std::string plot_data_csv(const std::vector<ContaminationReport>& reports) {
  if (reports.empty()) fail(Errc::InvalidArgument, "plot data needs at least one report");
  std::string out = "benchmark,series,mean,ci_low,ci_high\n";
  for (const auto& r : reports) {
    for (const AggregateResult* a : {&r.benchmark, &r.memorised, &r.clean}) {
      out += detail::csv_field(r.benchmark_name) + "," + std::string(to_string(a->label)) + "," +
             detail::format_double(a->mean_bits) + "," + detail::format_double(a->ci_low) + "," +
             detail::format_double(a->ci_high) + "\n";
    }
  }
  return out;
}

enum class ReportFormat { Json, Csv, Markdown };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  fail(Errc::InvalidArgument, "unknown report format '" + std::string(s) + "'");
}

inline std::string render_report(const ContaminationReport& r, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return to_json(r).dump(2) + "\n";
    case ReportFormat::Csv: return report_csv(r);
    case ReportFormat::Markdown: return report_markdown(r);
  }
  return {};
}

inline void emit_report(const ContaminationReport& r, ReportFormat format, const std::filesystem::path& destination) {
  io::write_text(destination, render_report(r, format));
}

inline void emit_plot_data(const std::vector<ContaminationReport>& reports, const std::filesystem::path& destination) {
  io::write_text(destination, plot_data_csv(reports));
}

struct SurprisalMap {
  std::string sample_id;
  std::vector<std::string> tokens;
  std::vector<double> bits;
  std::vector<int> bucket;

  double mean_bits() const {
    double s = 0.0;
    for (double b : bits) s += b;
    return bits.empty() ? 0.0 : s / static_cast<double>(bits.size());
  }
};

// bucket[i] counts how many of the within-map quintile cut points (20%, 40%,
// 60%, 80%) bits[i] strictly exceeds, so ties fall to the lower bucket.
inline SurprisalMap surprisal_map(const TokenScores& scores) {
  if (scores.logprobs.empty()) fail(Errc::EmptySequence, "sample '" + scores.sample_id + "' has no tokens");
  SurprisalMap m{scores.sample_id, scores.tokens, {}, {}};
  m.bits.reserve(scores.logprobs.size());
  for (double lp : scores.logprobs) m.bits.push_back(lp == 0.0 ? 0.0 : -lp);
  std::vector<double> sorted = m.bits;
  std::sort(sorted.begin(), sorted.end());
  double cuts[4];
  for (int k = 0; k < 4; ++k) cuts[k] = quantile_sorted(sorted, (k + 1) / 5.0);
  for (double b : m.bits) {
    int level = 0;
    for (double c : cuts) level += b > c ? 1 : 0;
    m.bucket.push_back(level);
  }
  return m;
}

namespace detail {
inline std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}
}  // namespace detail

// Self-contained page: each token is a span coloured by its surprisal bucket.
inline std::string surprisal_html(const std::vector<SurprisalMap>& maps, const std::string& title) {
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>" << detail::html_escape(title)
    << "</title>\n<style>\n"
    << "body{font-family:sans-serif;max-width:60em;margin:2em auto;line-height:1.8}\n"
    << "span.t{padding:1px 2px;border-radius:2px}\n"
    << ".s0{background:#f7fbff}.s1{background:#c6dbef}.s2{background:#6baed6}"
    << ".s3{background:#2171b5;color:#fff}.s4{background:#08306b;color:#fff}\n"
    << "</style></head><body>\n<h1>" << detail::html_escape(title) << "</h1>\n"
    << "<p>Darker tokens are more surprising to the model (quintiles within each text).</p>\n";
  for (const auto& m : maps) {
    h << "<section><h2>" << detail::html_escape(m.sample_id) << ": mean "
      << detail::fixed(m.mean_bits(), 3) << " bits/token</h2>\n<p>";
    for (std::size_t i = 0; i < m.tokens.size(); ++i) {
      h << "<span class=\"t s" << m.bucket[i] << "\" title=\"" << detail::fixed(m.bits[i], 3) << " bits\">"
        << detail::html_escape(m.tokens[i]) << "</span> ";
    }
    h << "</p></section>\n";
  }
  h << "</body></html>\n";
  return h.str();
}

}  // namespace contam
