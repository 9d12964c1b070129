#pragma once

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/analysis.hpp"
#include "contam/baselines.hpp"
#include "contam/config.hpp"
#include "contam/error.hpp"
#include "contam/io.hpp"
#include "contam/ngram.hpp"
#include "contam/remote.hpp"
#include "contam/reporting.hpp"
#include "contam/scorer.hpp"
#include "contam/verbalizer.hpp"
#include "contam/wikipedia.hpp"

namespace contam {

// Runs `fn`, tagging any library error with `stage`.
template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (!e.stage().empty()) throw;
    throw e.with_stage(stage);
  }
}

// ---- verbalize -------------------------------------------------------------

inline std::vector<VerbalizedSequence> verbalize_stage(const AuditConfig& c, std::vector<std::string>* errors = nullptr) {
  return in_stage("verbalize", [&] {
    const auto samples = load_benchmark(c.benchmark_path, c.format);
    auto outcome = verbalize_dataset(samples, c.tmpl, c.fields, c.lenient);
    if (errors) {
      for (const auto& [id, msg] : outcome.errors) errors->push_back(id + ": " + msg);
    }
    if (outcome.sequences.empty()) fail(Errc::EmptyDataset, "no benchmark samples verbalized");
    return outcome.sequences;
  });
}

inline std::size_t target_words(const AuditConfig& c, const std::vector<VerbalizedSequence>& benchmark) {
  return c.target_words ? *c.target_words : mean_word_length(benchmark);
}

// ---- baselines -------------------------------------------------------------

inline constexpr int kBaselineBundleVersion = 1;

inline nlohmann::json baselines_to_json(const std::vector<BaselineSet>& sets) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sets) arr.push_back(to_json(s));
  return {{"format", "contam-baselines"}, {"version", kBaselineBundleVersion}, {"sets", arr}};
}

inline std::vector<BaselineSet> baselines_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "contam-baselines") fail(Errc::FormatVersion, "not a baseline bundle");
  if (j.value("version", 0) != kBaselineBundleVersion) fail(Errc::FormatVersion, "unsupported baseline bundle version");
  std::vector<BaselineSet> out;
  for (const auto& s : j.at("sets")) out.push_back(baseline_set_from_json(s));
  return out;
}

// Builds `c.resample` draws of one baseline. Draw r uses seed + r; items of
// draws after the first get an "-r<r>" infix in their ids.
inline std::vector<BaselineSet> baseline_stage(const AuditConfig& c, BaselineLabel label,
                                               const std::vector<VerbalizedSequence>& benchmark,
                                               std::ostream* log = nullptr) {
  return in_stage("baselines", [&] {
    const auto& src = label == BaselineLabel::Memorised ? c.memorised : c.clean;
    const std::size_t target = target_words(c, benchmark);

    std::unique_ptr<WikipediaClient> client;
    std::unique_ptr<CandidateSource> source;
    if (src.source == SourceKind::LocalCorpus) {
      source = std::make_unique<LocalCorpus>(src.manifest);
    } else {
      WikipediaClient::Options opts;
      opts.wiki = src.wiki;
      opts.cache_dir = c.cache_dir;
      opts.offline = c.offline;
      opts.retry = c.retry;
      opts.politeness = c.politeness;
      client = std::make_unique<WikipediaClient>(opts);
      if (label == BaselineLabel::Memorised) {
        source = std::make_unique<WikipediaRevisionSource>(*client, src.titles);
      } else {
        source = std::make_unique<WikipediaNewPageSource>(*client);
      }
    }

    std::vector<BaselineSet> sets;
    for (std::size_t r = 0; r < c.resample; ++r) {
      const auto spec = c.baseline_spec(label, target, r);
      spec.validate(c.model_dates());
      BuildStats stats;
      auto set = build_baseline(spec, benchmark, *source, &stats);
      if (r > 0) {
        const std::string prefix = std::string(to_string(label)) + "-";
        for (auto& item : set.items) item.id = prefix + "r" + std::to_string(r) + "-" + item.id.substr(prefix.size());
      }
      if (log) {
        *log << to_string(label) << " baseline draw " << r << ": " << set.items.size() << " items from "
             << stats.considered << " candidates (" << stats.too_short << " too short, " << stats.overlapping
             << " overlapping)\n";
      }
      sets.push_back(std::move(set));
    }
    return sets;
  });
}

struct LabelledSequences {
  std::vector<VerbalizedSequence> sequences;
  std::vector<std::string> provenance;
};

inline LabelledSequences benchmark_inputs(const std::vector<VerbalizedSequence>& seqs) {
  LabelledSequences out{seqs, {}};
  for (const auto& s : seqs) out.provenance.push_back("benchmark:" + s.sample_id);
  return out;
}

inline LabelledSequences baseline_inputs(const std::vector<BaselineSet>& sets) {
  LabelledSequences out;
  for (const auto& set : sets) {
    for (const auto& item : set.items) {
      out.sequences.push_back({item.id, item.text, item.word_count});
      out.provenance.push_back(item.provenance.to_string());
    }
  }
  return out;
}

// ---- scoring ---------------------------------------------------------------

struct ScoredSample {
  TokenScores scores;
  std::size_t word_count = 0;
  std::string provenance;
};

struct ScoreFile {
  SetLabel label = SetLabel::Benchmark;
  std::string backend_kind;
  std::string backend_identity;
  std::string tokenization;
  std::vector<ScoredSample> results;
  std::vector<BatchFailure> failures;

  std::vector<PerplexityResult> perplexities() const {
    std::vector<PerplexityResult> out;
    out.reserve(results.size());
    for (const auto& r : results) {
      auto p = perplexity(r.scores);
      p.word_count = r.word_count;
      p.provenance = r.provenance;
      out.push_back(std::move(p));
    }
    return out;
  }
};

inline constexpr int kScoreFileVersion = 1;

inline nlohmann::json to_json(const ScoreFile& f) {
  nlohmann::json results = nlohmann::json::array();
  for (const auto& r : f.results) {
    auto j = to_json(r.scores);
    j["word_count"] = r.word_count;
    j["provenance"] = r.provenance;
    results.push_back(std::move(j));
  }
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& x : f.failures) {
    failures.push_back({{"sample_id", x.sample_id}, {"error", to_string(x.code)}, {"message", x.message}});
  }
  return {{"format", "contam-scores"},
          {"version", kScoreFileVersion},
          {"label", to_string(f.label)},
          {"backend", {{"kind", f.backend_kind}, {"identity", f.backend_identity}, {"tokenization", f.tokenization}}},
          {"results", results},
          {"failures", failures}};
}

inline ScoreFile score_file_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "contam-scores") fail(Errc::FormatVersion, "not a score file");
  if (j.value("version", 0) != kScoreFileVersion) fail(Errc::FormatVersion, "unsupported score file version");
  ScoreFile f;
  f.label = parse_set_label(j.at("label").get<std::string>());
  f.backend_kind = j.at("backend").at("kind").get<std::string>();
  f.backend_identity = j.at("backend").at("identity").get<std::string>();
  f.tokenization = j.at("backend").at("tokenization").get<std::string>();
  for (const auto& r : j.at("results")) {
    f.results.push_back(
        {token_scores_from_json(r), r.at("word_count").get<std::size_t>(), r.at("provenance").get<std::string>()});
  }
  for (const auto& x : j.at("failures")) {
    BatchFailure bf;
    bf.sample_id = x.at("sample_id").get<std::string>();
    bf.code = parse_errc(x.value("error", ""));
    bf.message = x.at("message").get<std::string>();
    f.failures.push_back(std::move(bf));
  }
  return f;
}

inline std::unique_ptr<ScorerBackend> make_backend(const AuditConfig& c) {
  return in_stage("scoring", [&]() -> std::unique_ptr<ScorerBackend> {
    if (c.backend == BackendChoice::Ngram) {
      auto model = std::make_shared<const NgramModel>(NgramModel::from_json(io::read_json(c.model_file)));
      return std::make_unique<NgramBackend>(model, c.max_context_tokens,
                                            c.model_name.empty() ? c.model_file.filename().string() : c.model_name);
    }
    RemoteConfig rc;
    rc.endpoint = c.endpoint;
    rc.model = c.model_name;
    rc.api_key_env = c.api_key_env;
    rc.retry = c.retry;
    rc.timeout = c.timeout;
    return std::make_unique<RemoteBackend>(rc);
  });
}

inline ScoreFile score_stage(const ScorerBackend& backend, SetLabel label, const LabelledSequences& input,
                             const BatchOptions& options) {
  return in_stage("scoring", [&] {
    auto batch = score_batch(backend, input.sequences, options);
    ScoreFile f;
    f.label = label;
    f.backend_kind = std::string(to_string(backend.kind()));
    f.backend_identity = backend.identity();
    f.tokenization = backend.tokenization();
    for (std::size_t i = 0; i < batch.scores.size(); ++i) {
      if (!batch.scores[i]) continue;
      f.results.push_back({std::move(*batch.scores[i]), input.sequences[i].word_count, input.provenance[i]});
    }
    f.failures = std::move(batch.failures);
    if (f.results.empty()) fail(Errc::EmptyDataset, "every " + std::string(to_string(label)) + " sample failed");
    return f;
  });
}

inline BatchOptions batch_options(const AuditConfig& c) {
  return BatchOptions{c.max_in_flight, c.lenient, c.max_consecutive_failures};
}

// ---- analysis and output ---------------------------------------------------

inline ContaminationReport analyze_stage(const AuditConfig& c, const ScoreFile& bench, const ScoreFile& mem,
                                         const ScoreFile& clean) {
  return in_stage("analysis", [&] {
    const auto check = [](const ScoreFile& f, SetLabel want) {
      if (f.label != want) {
        fail(Errc::InvalidArgument, "expected " + std::string(to_string(want)) + " scores, got " +
                                        std::string(to_string(f.label)));
      }
    };
    check(bench, SetLabel::Benchmark);
    check(mem, SetLabel::Memorised);
    check(clean, SetLabel::Clean);
    if (bench.tokenization != mem.tokenization || bench.tokenization != clean.tokenization) {
      fail(Errc::InvalidArgument, "score files were produced with different tokenizations");
    }
    AnalysisOptions opts;
    opts.thresholds = c.thresholds;
    opts.bootstrap_iterations = c.bootstrap_iterations;
    opts.seed = c.seed;
    opts.config_fingerprint = config_fingerprint(c);
    opts.benchmark_name = c.name;
    auto report = compare(bench.perplexities(), mem.perplexities(), clean.perplexities(), opts);
    std::size_t failed = bench.failures.size() + mem.failures.size() + clean.failures.size();
    if (failed > 0) {
      report.caveats.push_back(std::to_string(failed) + " sample(s) failed to score and were excluded (lenient mode).");
    }
    return report;
  });
}

// Up to `per_set` maps from each score file, in file order.
inline std::vector<SurprisalMap> surprisal_maps(const std::vector<const ScoreFile*>& files, std::size_t per_set = 3) {
  std::vector<SurprisalMap> maps;
  for (const auto* f : files) {
    for (std::size_t i = 0; i < f->results.size() && i < per_set; ++i) {
      auto m = surprisal_map(f->results[i].scores);
      m.sample_id = std::string(to_string(f->label)) + " / " + m.sample_id;
      maps.push_back(std::move(m));
    }
  }
  return maps;
}

inline std::string format_extension(ReportFormat f) {
  switch (f) {
    case ReportFormat::Json: return "json";
    case ReportFormat::Csv: return "csv";
    case ReportFormat::Markdown: return "md";
  }
  return "json";
}

inline std::string summary_paragraph(const ContaminationReport& r) {
  std::ostringstream s;
  s << r.benchmark_name << ": benchmark " << detail::fixed(r.benchmark.mean_bits, 3) << " bits/token (95% CI "
    << detail::fixed(r.benchmark.ci_low, 3) << "-" << detail::fixed(r.benchmark.ci_high, 3) << "), memorised "
    << detail::fixed(r.memorised.mean_bits, 3) << ", clean " << detail::fixed(r.clean.mean_bits, 3) << ". ";
  if (r.score) {
    s << "Contamination score " << detail::fixed(*r.score, 3) << ": " << to_string(r.verdict) << ".";
  } else {
    s << "No score: degenerate baselines.";
  }
  return s.str();
}

struct AuditArtifacts {
  std::vector<VerbalizedSequence> sequences;
  std::vector<BaselineSet> memorised;
  std::vector<BaselineSet> clean;
  ScoreFile bench_scores;
  ScoreFile mem_scores;
  ScoreFile clean_scores;
  ContaminationReport report;
  std::vector<std::filesystem::path> written;
};

inline std::vector<std::filesystem::path> write_report_outputs(const AuditConfig& c, const ContaminationReport& report,
                                                               const std::vector<const ScoreFile*>& scores) {
  return in_stage("report", [&] {
    std::vector<std::filesystem::path> written;
    for (auto f : c.output_formats) {
      const auto path = c.output_dir / ("report." + format_extension(f));
      emit_report(report, f, path);
      written.push_back(path);
    }
    const auto plot = c.output_dir / "plot.csv";
    emit_plot_data({report}, plot);
    written.push_back(plot);
    if (!scores.empty()) {
      const auto html = c.output_dir / "surprisal.html";
      io::write_text(html, surprisal_html(surprisal_maps(scores), "Token surprisal: " + c.name));
      written.push_back(html);
    }
    return written;
  });
}

// verbalize -> build both baselines -> score three sets -> compare -> emit.
// Every intermediate artifact is written to the output directory so the
// staged CLI commands can reproduce each step.
inline AuditArtifacts run_audit(const AuditConfig& c, std::ostream* log = nullptr) {
  AuditArtifacts a;
  const auto& out = c.output_dir;
  std::vector<std::string> verbalize_errors;
  a.sequences = verbalize_stage(c, &verbalize_errors);
  for (const auto& e : verbalize_errors) {
    if (log) *log << "skipped: " << e << "\n";
  }
  in_stage("verbalize", [&] { io::write_text(out / "sequences.jsonl", to_ndjson(a.sequences)); return 0; });

  a.memorised = baseline_stage(c, BaselineLabel::Memorised, a.sequences, log);
  a.clean = baseline_stage(c, BaselineLabel::Clean, a.sequences, log);
  in_stage("baselines", [&] {
    io::write_json(out / "baseline-memorised.json", baselines_to_json(a.memorised));
    io::write_json(out / "baseline-clean.json", baselines_to_json(a.clean));
    return 0;
  });

  const auto backend = make_backend(c);
  const auto opts = batch_options(c);
  a.bench_scores = score_stage(*backend, SetLabel::Benchmark, benchmark_inputs(a.sequences), opts);
  a.mem_scores = score_stage(*backend, SetLabel::Memorised, baseline_inputs(a.memorised), opts);
  a.clean_scores = score_stage(*backend, SetLabel::Clean, baseline_inputs(a.clean), opts);
  in_stage("scoring", [&] {
    io::write_json(out / "scores-benchmark.json", to_json(a.bench_scores));
    io::write_json(out / "scores-memorised.json", to_json(a.mem_scores));
    io::write_json(out / "scores-clean.json", to_json(a.clean_scores));
    return 0;
  });

  a.report = analyze_stage(c, a.bench_scores, a.mem_scores, a.clean_scores);
  a.written = write_report_outputs(c, a.report, {&a.bench_scores, &a.mem_scores, &a.clean_scores});
  return a;
}

}  // namespace contam
