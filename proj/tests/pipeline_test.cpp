#include "contam/pipeline.hpp"

#include <functional>
#include <string>

#include <gtest/gtest.h>

#include "contam/experiment.hpp"
#include "fixtures.hpp"

namespace contam {
namespace {

namespace fs = std::filesystem;

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return Errc::InvalidArgument;
}

// rc-wikipedia preset against GPT-3 with a one-title memorised list.
nlohmann::json wiki_config() {
  return {{"preset", "rc-wikipedia"},
          {"benchmark", {{"path", "bench.jsonl"}}},
          {"model", {{"preset", "gpt-3"}, {"backend", "remote"}, {"endpoint", "http://127.0.0.1:1"}}},
          {"baselines", {{"seed", 1}, {"memorised", {{"titles", {"Kanye West"}}}}}}};
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  io::write_text(dir / "bench.jsonl", R"({"id":"a","title":"T","context":"one two three","question":"q","answers":"x"})"
                                      "\n");
  io::write_json(dir / "config.json", j);
  return dir / "config.json";
}

TEST(Presets, BenchmarkFamilies) {
  const auto& b = benchmark_presets();
  EXPECT_EQ(b.at("rc-wikipedia")["benchmark"]["target_words"], 107);
  EXPECT_EQ(b.at("summarisation")["benchmark"]["target_words"], 358);
  EXPECT_EQ(b.at("multichoice")["benchmark"]["target_words"], "infer");
}

TEST(Presets, ModelWindows) {
  const auto& m = model_presets();
  EXPECT_EQ(m.at("gpt-3")["training_window"]["start"], "2016-01-01");
  EXPECT_EQ(m.at("gpt-3")["training_window"]["end"], "2019-12-31");
  EXPECT_EQ(m.at("llama")["training_window"]["start"], "2022-06-01");
  EXPECT_EQ(m.at("llama")["training_window"]["end"], "2022-08-31");
}

TEST(Config, PresetResolution) {
  const auto dir = fixtures::scratch_dir("cfg-preset");
  const auto c = load_config(write_config(dir, wiki_config()));
  EXPECT_EQ(c.format, Format::ReadingComprehension);
  EXPECT_EQ(c.fields, FieldPolicy{"context"});
  EXPECT_EQ(c.target_words, std::optional<std::size_t>(107));
  EXPECT_EQ(c.model_name, "gpt-3");
  EXPECT_EQ(c.training_window.to_string(), TimeWindow(Date::parse("2016-01-01"), Date::parse("2019-12-31")).to_string());
  EXPECT_EQ(c.memorised.window.to_string(), c.training_window.to_string());
  EXPECT_EQ(c.memorised.source, SourceKind::WikipediaRevisions);
  EXPECT_EQ(c.clean.source, SourceKind::WikipediaRevisions);
  EXPECT_EQ(c.benchmark_path, dir / "bench.jsonl");
  EXPECT_EQ(c.output_dir, dir / "out");
}

TEST(Config, EveryPresetPairValidates) {
  const auto dir = fixtures::scratch_dir("cfg-all");
  io::write_json(dir / "m.json", nlohmann::json::array());
  for (const auto& [bname, _] : benchmark_presets()) {
    for (const auto& [mname, __] : model_presets()) {
      nlohmann::json j = {{"preset", bname},
                          {"benchmark", {{"path", "bench.jsonl"}}},
                          {"model", {{"preset", mname}, {"model_file", "model.json"}}},
                          {"baselines",
                           {{"seed", 0},
                            {"memorised", {{"manifest", "m.json"}, {"titles", {"X"}}}},
                            {"clean", {{"manifest", "m.json"}, {"window", {{"start", "2023-06-01"}, {"end", "2023-06-30"}}}}}}}};
      EXPECT_NO_THROW(load_config(write_config(dir, j))) << bname << " / " << mname;
    }
  }
}

TEST(Config, ShippedExamplesValidate) {
  std::size_t n = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(CONTAM_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".json" || entry.path().filename() == "templates.json") continue;
    EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 4u);
  const auto gpt3 = load_config(fs::path(CONTAM_SOURCE_DIR) / "configs" / "squad-gpt3.json");
  EXPECT_EQ(gpt3.memorised.titles.size(), 8u);
  EXPECT_EQ(gpt3.memorised.window.to_string(), "2016-01-01..2019-12-31");
  const auto mmlu = load_config(fs::path(CONTAM_SOURCE_DIR) / "configs" / "mmlu-llama.json");
  EXPECT_EQ(mmlu.tmpl.pattern(), "Question: {question}\nOptions: {choices}\nAnswer: {answer}");
}

TEST(Config, OverridesTakePrecedence) {
  const auto dir = fixtures::scratch_dir("cfg-override");
  const auto path = write_config(dir, wiki_config());
  const auto c = load_config(path, {{"baselines", {{"seed", 99}}}, {"benchmark", {{"target_words", 50}}}});
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.target_words, std::optional<std::size_t>(50));
  auto user = wiki_config();
  user["benchmark"]["target_words"] = "infer";
  EXPECT_FALSE(load_config(write_config(dir, user)).target_words.has_value());
}

TEST(Config, WindowViolationsRejected) {
  const auto dir = fixtures::scratch_dir("cfg-window");
  auto early_clean = wiki_config();
  early_clean["baselines"]["clean"]["window"] = {{"start", "2020-01-01"}, {"end", "2020-02-01"}};
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, early_clean)); }), Errc::ConfigError);

  auto mem_outside = wiki_config();
  mem_outside["baselines"]["memorised"]["window"] = {{"start", "2019-06-01"}, {"end", "2020-03-01"}};
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, mem_outside)); }), Errc::ConfigError);

  auto training_after_release = wiki_config();
  training_after_release["model"]["training_window"]["end"] = "2021-01-01";
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, training_after_release)); }), Errc::ConfigError);
}

TEST(Config, StructuralErrors) {
  const auto dir = fixtures::scratch_dir("cfg-errors");
  auto j = wiki_config();
  j["preset"] = "nope";
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, j)); }), Errc::ConfigError);

  j = wiki_config();
  j["baselines"]["memorised"].erase("titles");
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, j)); }), Errc::ConfigError);

  j = wiki_config();
  j["baselines"]["clean"]["source"] = "LocalCorpus";
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, j)); }), Errc::ConfigError);

  j = wiki_config();
  j["benchmark"]["fields"] = {"question"};
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, j)); }), Errc::ConfigError);

  j = wiki_config();
  j["analysis"] = {{"thresholds", {{"low", 0.9}, {"high", 0.1}}}};
  EXPECT_EQ(code_of([&] { load_config(write_config(dir, j)); }), Errc::InvalidThresholds);

  EXPECT_EQ(code_of([&] { load_config(dir / "missing.json"); }), Errc::ConfigError);
  io::write_text(dir / "broken.json", "{");
  EXPECT_EQ(code_of([&] { load_config(dir / "broken.json"); }), Errc::ConfigError);
}

TEST(Fingerprint, TracksSemanticFieldsOnly) {
  const auto dir = fixtures::scratch_dir("cfg-fp");
  const auto path = write_config(dir, wiki_config());
  const auto base = config_fingerprint(load_config(path));
  EXPECT_EQ(base.size(), 16u);

  for (const auto& neutral : {nlohmann::json{{"output", {{"dir", "elsewhere"}, {"formats", {"md"}}}}},
                              nlohmann::json{{"offline", true}},
                              nlohmann::json{{"cache_dir", "cache2"}},
                              nlohmann::json{{"network", {{"max_attempts", 1}}}},
                              nlohmann::json{{"model", {{"max_in_flight", 16}}}}}) {
    EXPECT_EQ(config_fingerprint(load_config(path, neutral)), base) << neutral.dump();
  }
  for (const auto& semantic : {nlohmann::json{{"baselines", {{"seed", 2}}}},
                               nlohmann::json{{"analysis", {{"thresholds", {{"low", 0.3}}}}}},
                               nlohmann::json{{"analysis", {{"bootstrap_iterations", 10}}}},
                               nlohmann::json{{"benchmark", {{"target_words", 100}}}},
                               nlohmann::json{{"baselines", {{"clean", {{"sample_count", 10}}}}}}}) {
    EXPECT_NE(config_fingerprint(load_config(path, semantic)), base) << semantic.dump();
  }
  io::write_text(dir / "bench.jsonl", R"({"id":"a","title":"T","context":"changed","question":"q","answers":"x"})"
                                      "\n");
  EXPECT_NE(config_fingerprint(load_config(path)), base);
}

class SyntheticPipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(fixtures::scratch_dir("pipeline"));
    synthetic::ExperimentOptions o;
    o.bench_size = 12;
    o.memorised_pool = 60;
    o.clean_pool = 30;
    o.sample_count = 12;
    o.bootstrap_iterations = 200;
    layout_ = new synthetic::ExperimentLayout(synthetic::write_experiment(*root_, o));
  }
  static void TearDownTestSuite() {
    fs::remove_all(*root_);
    delete layout_;
    delete root_;
  }
  static AuditConfig config(const std::string& out, const nlohmann::json& extra = nlohmann::json::object()) {
    nlohmann::json o = {{"output", {{"dir", out}}}};
    o.merge_patch(extra);
    return load_config(layout_->contaminated_config, o);
  }

  static fs::path* root_;
  static synthetic::ExperimentLayout* layout_;
};

fs::path* SyntheticPipeline::root_ = nullptr;
synthetic::ExperimentLayout* SyntheticPipeline::layout_ = nullptr;

TEST_F(SyntheticPipeline, RunWritesEveryArtifact) {
  const auto c = config("run-a");
  const auto a = run_audit(c);
  for (const char* f : {"sequences.jsonl", "baseline-memorised.json", "baseline-clean.json", "scores-benchmark.json",
                        "scores-memorised.json", "scores-clean.json", "report.json", "report.csv", "report.md",
                        "plot.csv", "surprisal.html"}) {
    EXPECT_TRUE(fs::exists(c.output_dir / f)) << f;
  }
  EXPECT_EQ(a.sequences.size(), 12u);
  EXPECT_EQ(a.memorised.at(0).items.size(), 12u);
  EXPECT_EQ(a.report.verdict, Verdict::MemorisedLeaning);
  EXPECT_EQ(a.report.config_fingerprint, config_fingerprint(c));
}

TEST_F(SyntheticPipeline, RunIsByteReproducible) {
  const auto a = config("det-a");
  const auto b = config("det-b");
  run_audit(a);
  run_audit(b);
  for (const char* f : {"report.json", "report.csv", "report.md", "scores-clean.json", "baseline-memorised.json"}) {
    EXPECT_EQ(io::read_text(a.output_dir / f), io::read_text(b.output_dir / f)) << f;
  }
}

TEST_F(SyntheticPipeline, StagedMatchesOneShot) {
  const auto c = config("staged-ref");
  const auto ref = run_audit(c);

  // Each stage reads the previous stage's file, as the staged CLI does.
  const auto seqs = parse_sequences(io::read_text(c.output_dir / "sequences.jsonl"));
  const auto mem = baselines_from_json(io::read_json(c.output_dir / "baseline-memorised.json"));
  const auto clean = baselines_from_json(io::read_json(c.output_dir / "baseline-clean.json"));
  EXPECT_EQ(baselines_to_json(baseline_stage(c, BaselineLabel::Memorised, seqs)), baselines_to_json(mem));
  const auto backend = make_backend(c);
  const auto bench_scores = score_stage(*backend, SetLabel::Benchmark, benchmark_inputs(seqs), batch_options(c));
  const auto mem_scores = score_stage(*backend, SetLabel::Memorised, baseline_inputs(mem), batch_options(c));
  const auto clean_scores = score_stage(*backend, SetLabel::Clean, baseline_inputs(clean), batch_options(c));
  EXPECT_EQ(to_json(bench_scores), io::read_json(c.output_dir / "scores-benchmark.json"));
  const auto report = analyze_stage(c, score_file_from_json(to_json(bench_scores)),
                                    score_file_from_json(to_json(mem_scores)), score_file_from_json(to_json(clean_scores)));
  EXPECT_EQ(report, ref.report);
}

TEST_F(SyntheticPipeline, ConcurrencyDoesNotChangeScores) {
  const auto serial = config("conc-1", {{"model", {{"max_in_flight", 1}}}});
  const auto wide = config("conc-8", {{"model", {{"max_in_flight", 8}}}});
  run_audit(serial);
  run_audit(wide);
  EXPECT_EQ(io::read_text(serial.output_dir / "report.json"), io::read_text(wide.output_dir / "report.json"));
}

TEST_F(SyntheticPipeline, ResampleAddsIndependentDraws) {
  const auto c = config("resample", {{"baselines", {{"resample", 2}}}});
  const auto a = run_audit(c);
  ASSERT_EQ(a.memorised.size(), 2u);
  EXPECT_EQ(a.memorised[1].items.front().id.rfind("memorised-r1-", 0), 0u);
  EXPECT_EQ(a.report.memorised.n, 24u);
}

TEST_F(SyntheticPipeline, AnalyzeChecksLabels) {
  const auto c = config("labels");
  const auto a = run_audit(c);
  try {
    analyze_stage(c, a.mem_scores, a.mem_scores, a.clean_scores);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.stage(), "analysis");
  }
  auto other = a.clean_scores;
  other.tokenization = "different";
  EXPECT_THROW(analyze_stage(c, a.bench_scores, a.mem_scores, other), Error);
}

TEST_F(SyntheticPipeline, ScoreFileRoundTrip) {
  const auto a = run_audit(config("scorefile"));
  auto f = a.bench_scores;
  f.failures.push_back({3, "x", Errc::ContextOverflow, "too long"});
  const auto back = score_file_from_json(to_json(f));
  EXPECT_EQ(to_json(back), to_json(f));
  EXPECT_EQ(back.failures.at(0).code, Errc::ContextOverflow);
  EXPECT_EQ(back.perplexities(), f.perplexities());
  EXPECT_THROW(score_file_from_json({{"format", "contam-scores"}, {"version", 7}}), Error);
}

TEST(Summary, MentionsVerdict) {
  AnalysisOptions o;
  o.bootstrap_iterations = 10;
  const auto one = std::vector<PerplexityResult>{{"a", 3.0, 1, 1, ""}};
  const auto r = compare(one, std::vector<PerplexityResult>{{"b", 2.0, 1, 1, ""}},
                         std::vector<PerplexityResult>{{"c", 6.0, 1, 1, ""}}, o);
  EXPECT_NE(summary_paragraph(r).find(std::string(to_string(r.verdict))), std::string::npos);
}

}  // namespace
}  // namespace contam
