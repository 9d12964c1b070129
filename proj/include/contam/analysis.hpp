#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contam/error.hpp"
#include "contam/rng.hpp"
#include "contam/scorer.hpp"
#include "contam/version.hpp"

namespace contam {

enum class SetLabel { Benchmark, Memorised, Clean };

inline std::string_view to_string(SetLabel l) {
  switch (l) {
    case SetLabel::Benchmark: return "benchmark";
    case SetLabel::Memorised: return "memorised";
    case SetLabel::Clean: return "clean";
  }
  return "benchmark";
}

inline SetLabel parse_set_label(std::string_view s) {
  for (SetLabel l : {SetLabel::Benchmark, SetLabel::Memorised, SetLabel::Clean}) {
    if (s == to_string(l)) return l;
  }
  fail(Errc::InvalidArgument, "unknown set label '" + std::string(s) + "'");
}

struct AggregateResult {
  SetLabel label = SetLabel::Benchmark;
  double mean_bits = 0.0;
  std::vector<PerplexityResult> per_sample;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;

  friend bool operator==(const AggregateResult&, const AggregateResult&) = default;
};

inline constexpr double kConfidence = 0.95;

// Sample quantile with linear interpolation between order statistics
// (Hyndman-Fan type 7). `sorted` must be ascending and non-empty.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Means of `iterations` resamples (with replacement) of `values`. Resample b
// draws its indices from rng::stream(seed, b), so the output does not depend
// on evaluation order.
inline std::vector<double> bootstrap_means(std::span<const double> values, std::size_t iterations,
                                           std::uint64_t seed) {
  std::vector<double> means;
  means.reserve(iterations);
  const std::size_t n = values.size();
  for (std::size_t b = 0; b < iterations; ++b) {
    auto engine = rng::stream(seed, b);
    double sum = 0.0;
    for (std::size_t k = 0; k < n; ++k) sum += values[rng::uniform_index(engine, n)];
    means.push_back(sum / static_cast<double>(n));
  }
  return means;
}

// Unweighted per-sequence mean plus a 95% percentile-bootstrap interval.
// Values are sorted before summing and resampling, which makes the result
// independent of the input order.
inline AggregateResult aggregate(std::span<const PerplexityResult> results, SetLabel label,
                                 std::size_t bootstrap_iters, std::uint64_t seed) {
  if (results.empty()) fail(Errc::EmptyDataset, "no perplexities to aggregate for " + std::string(to_string(label)));
  std::vector<double> values;
  values.reserve(results.size());
  for (const auto& r : results) values.push_back(r.bits_per_token);
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());

  AggregateResult out{label, mean, {results.begin(), results.end()}, mean, mean, results.size()};
  if (bootstrap_iters > 0) {
    auto means = bootstrap_means(values, bootstrap_iters, seed);
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - kConfidence) / 2.0;
    out.ci_low = quantile_sorted(means, tail);
    out.ci_high = quantile_sorted(means, 1.0 - tail);
  }
  return out;
}

// Position of the benchmark between the clean (0) and memorised (1)
// baselines. Values beyond [0, 1] mean the benchmark lies outside the
// baseline interval.
inline double contamination_score(double bench, double mem, double clean) {
  if (!std::isfinite(bench) || !std::isfinite(mem) || !std::isfinite(clean)) {
    fail(Errc::InvalidArgument, "perplexities must be finite");
  }
  if (!(clean > mem)) {
    fail(Errc::DegenerateBaselines, "clean baseline (" + std::to_string(clean) +
                                        " bits) is not above the memorised baseline (" + std::to_string(mem) +
                                        " bits)");
  }
  return (clean - bench) / (clean - mem);
}

enum class Verdict { MemorisedLeaning, CleanLeaning, Inconclusive, Degenerate };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::MemorisedLeaning: return "MemorisedLeaning";
    case Verdict::CleanLeaning: return "CleanLeaning";
    case Verdict::Inconclusive: return "Inconclusive";
    case Verdict::Degenerate: return "Degenerate";
  }
  return "Inconclusive";
}

inline Verdict parse_verdict(std::string_view s) {
  for (Verdict v : {Verdict::MemorisedLeaning, Verdict::CleanLeaning, Verdict::Inconclusive, Verdict::Degenerate}) {
    if (s == to_string(v)) return v;
  }
  fail(Errc::InvalidArgument, "unknown verdict '" + std::string(s) + "'");
}

struct Thresholds {
  double low = 0.25;
  double high = 0.75;

  void validate() const {
    if (!(low < high)) {
      fail(Errc::InvalidThresholds, "low threshold " + std::to_string(low) + " must be below high " +
                                        std::to_string(high));
    }
  }

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

inline Verdict verdict(double score, const Thresholds& t) {
  t.validate();
  if (score >= t.high) return Verdict::MemorisedLeaning;
  if (score <= t.low) return Verdict::CleanLeaning;
  return Verdict::Inconclusive;
}

struct AnalysisOptions {
  Thresholds thresholds;
  std::size_t bootstrap_iterations = 10000;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string benchmark_name = "benchmark";
};

struct ContaminationReport {
  std::string benchmark_name;
  AggregateResult benchmark;
  AggregateResult memorised;
  AggregateResult clean;
  std::optional<double> score;  // absent when the baselines are degenerate
  Verdict verdict = Verdict::Degenerate;
  Thresholds thresholds;
  std::size_t bootstrap_iterations = 0;
  std::uint64_t seed = 0;
  std::string config_fingerprint;
  std::string tool_version;
  std::vector<std::string> caveats;

  friend bool operator==(const ContaminationReport&, const ContaminationReport&) = default;
};

inline ContaminationReport compare(std::span<const PerplexityResult> benchmark,
                                   std::span<const PerplexityResult> memorised,
                                   std::span<const PerplexityResult> clean, const AnalysisOptions& options) {
  options.thresholds.validate();
  ContaminationReport r;
  r.benchmark_name = options.benchmark_name;
  r.benchmark = aggregate(benchmark, SetLabel::Benchmark, options.bootstrap_iterations, options.seed);
  r.memorised = aggregate(memorised, SetLabel::Memorised, options.bootstrap_iterations, options.seed + 1);
  r.clean = aggregate(clean, SetLabel::Clean, options.bootstrap_iterations, options.seed + 2);
  r.thresholds = options.thresholds;
  r.bootstrap_iterations = options.bootstrap_iterations;
  r.seed = options.seed;
  r.config_fingerprint = options.config_fingerprint;
  r.tool_version = std::string(kToolVersion);

  try {
    r.score = contamination_score(r.benchmark.mean_bits, r.memorised.mean_bits, r.clean.mean_bits);
    r.verdict = verdict(*r.score, r.thresholds);
  } catch (const Error& e) {
    if (e.code() != Errc::DegenerateBaselines) throw;
    r.score.reset();
    r.verdict = Verdict::Degenerate;
    r.caveats.push_back("Degenerate baselines: the clean baseline is not less predictable than the memorised "
                        "baseline, so no score is meaningful.");
  }
  if (r.score && *r.score > 1.0) {
    r.caveats.push_back("Score above 1: the benchmark is more predictable than the memorised baseline.");
  }
  if (r.score && *r.score < 0.0) {
    r.caveats.push_back("Score below 0: the benchmark is less predictable than the clean baseline.");
  }
  r.caveats.push_back("Temporal drift: clean texts postdate the training data and may differ in topic or style "
                      "regardless of leakage; the score does not correct for this.");
  r.caveats.push_back("Memorised-baseline membership in the training data is assumed from the declared training "
                      "window, not verified.");
  return r;
}

}  // namespace contam
