#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "contam/io.hpp"
#include "fixtures.hpp"

namespace {

namespace fs = std::filesystem;
using contam::io::read_text;
using contam::io::write_json;
using contam::io::write_text;

struct Outcome {
  int code = -1;
  std::string output;
};

// Runs contam-probe with `args`, capturing stdout and stderr.
Outcome probe(const std::string& args) {
  const std::string cmd = std::string(CONTAM_PROBE_PATH) + " " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return o;
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof buf, pipe)) > 0;) o.output.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

const char* kBench =
    R"({"id":"a","title":"T1","context":"alpha beta gamma","question":"q1","answers":"x"})"
    "\n"
    R"({"id":"b","title":"T2","context":"delta epsilon","question":"q2","answers":["y","z"]})"
    "\n"
    R"({"id":"c","title":"T3","context":"zeta","question":"q3","answers":"w"})"
    "\n";

TEST(Cli, VersionAndHelp) {
  EXPECT_EQ(probe("--version").code, 0);
  const auto help = probe("--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.output.find("build-baseline"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(probe("").code, 2);
  EXPECT_EQ(probe("frobnicate").code, 2);
  EXPECT_EQ(probe("run").code, 2);
}

TEST(Cli, VerbalizeWritesOneLinePerSample) {
  const auto dir = fixtures::scratch_dir("cli-verb");
  write_text(dir / "bench.jsonl", kBench);
  const auto r = probe("verbalize --input " + q(dir / "bench.jsonl") +
                       " --format ReadingComprehension --fields context --out " + q(dir / "seq.jsonl"));
  ASSERT_EQ(r.code, 0) << r.output;
  const auto out = read_text(dir / "seq.jsonl");
  EXPECT_EQ(std::count(out.begin(), out.end(), '\n'), 3);
  EXPECT_NE(out.find("Context: alpha beta gamma"), std::string::npos);
  EXPECT_EQ(out.find("Question"), std::string::npos);
}

TEST(Cli, VerbalizeStrictVersusLenient) {
  const auto dir = fixtures::scratch_dir("cli-lenient");
  write_text(dir / "bench.jsonl", std::string(kBench) + R"({"id":"d","title":"T4"})" + "\n");
  const std::string base = "verbalize --input " + q(dir / "bench.jsonl") +
                           " --format ReadingComprehension --fields context --out " + q(dir / "seq.jsonl");
  const auto strict = probe(base);
  EXPECT_EQ(strict.code, 1);
  EXPECT_NE(strict.output.find("'d'"), std::string::npos);
  EXPECT_EQ(probe(base + " --lenient").code, 0);
}

TEST(Cli, ScoreIsDeterministic) {
  const auto dir = fixtures::scratch_dir("cli-score");
  write_text(dir / "bench.jsonl", kBench);
  write_text(dir / "train.txt", "alpha beta gamma delta epsilon zeta alpha beta");
  ASSERT_EQ(probe("train-ngram --files " + q(dir / "train.txt") + " --order 2 --out " + q(dir / "model.json")).code, 0);
  ASSERT_EQ(probe("verbalize --input " + q(dir / "bench.jsonl") +
                  " --format ReadingComprehension --out " + q(dir / "seq.jsonl"))
                .code,
            0);
  const std::string cmd = "score --backend ngram --model-file " + q(dir / "model.json") + " --input " +
                          q(dir / "seq.jsonl") + " --max-in-flight 3 --out ";
  ASSERT_EQ(probe(cmd + q(dir / "s1.json")).code, 0);
  ASSERT_EQ(probe(cmd + q(dir / "s2.json")).code, 0);
  EXPECT_EQ(read_text(dir / "s1.json"), read_text(dir / "s2.json"));
  EXPECT_NE(read_text(dir / "s1.json").find("\"label\": \"benchmark\""), std::string::npos);
}

TEST(Cli, CleanWindowBeforeReleaseIsConfigError) {
  fixtures::WikiServer wiki({});
  const auto dir = fixtures::scratch_dir("cli-config");
  write_text(dir / "bench.jsonl", kBench);
  write_json(dir / "audit.json",
             {{"preset", "rc-wikipedia"},
              {"benchmark", {{"path", "bench.jsonl"}}},
              {"model", {{"preset", "gpt-3"}, {"model_file", "model.json"}}},
              {"baselines",
               {{"seed", 0},
                {"memorised", {{"titles", {"A"}}, {"wiki", wiki.url()}}},
                {"clean", {{"wiki", wiki.url()}, {"window", {{"start", "2020-01-01"}, {"end", "2020-03-01"}}}}}}}});
  const auto r = probe("run --config " + q(dir / "audit.json"));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_EQ(wiki.requests(), 0);
}

TEST(Cli, UnreachableWikiIsNetworkError) {
  const auto dir = fixtures::scratch_dir("cli-network");
  write_text(dir / "bench.jsonl", kBench);
  write_text(dir / "train.txt", "alpha beta gamma");
  ASSERT_EQ(probe("train-ngram --files " + q(dir / "train.txt") + " --out " + q(dir / "model.json")).code, 0);
  write_json(dir / "audit.json",
             {{"preset", "rc-wikipedia"},
              {"benchmark", {{"path", "bench.jsonl"}}},
              {"model", {{"preset", "gpt-3"}, {"model_file", "model.json"}}},
              {"cache_dir", "cache"},
              {"network", {{"max_attempts", 1}, {"politeness_ms", 0}, {"timeout_s", 2}}},
              {"baselines",
               {{"seed", 0},
                {"memorised", {{"titles", {"A"}}, {"wiki", "http://127.0.0.1:1"}}},
                {"clean", {{"wiki", "http://127.0.0.1:1"}}}}}});
  const auto r = probe("run --config " + q(dir / "audit.json"));
  EXPECT_EQ(r.code, 3) << r.output;
  const auto offline = probe("run --offline --config " + q(dir / "audit.json"));
  EXPECT_EQ(offline.code, 3) << offline.output;
}

TEST(Cli, UnreachableScoringEndpointIsBackendError) {
  const auto dir = fixtures::scratch_dir("cli-backend");
  write_text(dir / "bench.jsonl", kBench);
  ASSERT_EQ(probe("verbalize --input " + q(dir / "bench.jsonl") +
                  " --format ReadingComprehension --out " + q(dir / "seq.jsonl"))
                .code,
            0);
  fixtures::EchoServer echo;
  const auto r = probe("score --backend remote --endpoint " + echo.url() + " --model server-error --input " +
                       q(dir / "seq.jsonl") + " --out " + q(dir / "s.json"));
  EXPECT_EQ(r.code, 4) << r.output;
}

TEST(Cli, SyntheticRunEndToEnd) {
  const auto dir = fixtures::scratch_dir("cli-synth");
  ASSERT_EQ(probe("synth --out " + q(dir) + " --bootstrap-iterations 200").code, 0);
  const auto r = probe("run --config " + q(dir / "audit-contaminated.json"));
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("MemorisedLeaning"), std::string::npos);
  const auto report = read_text(dir / "out-contaminated" / "report.json");
  const auto again = probe("run --config " + q(dir / "audit-contaminated.json") + " --out " + q(dir / "again"));
  ASSERT_EQ(again.code, 0);
  EXPECT_EQ(read_text(dir / "again" / "report.json"), report);

  const auto rendered = probe("report --input " + q(dir / "out-contaminated" / "report.json") + " --format markdown --out " +
                              q(dir / "r.md") + " --plot-data " + q(dir / "plot.csv"));
  ASSERT_EQ(rendered.code, 0) << rendered.output;
  EXPECT_NE(read_text(dir / "r.md").find("# Contamination report"), std::string::npos);
}

nlohmann::json score_file(const std::string& label, double bits) {
  return {{"format", "contam-scores"},
          {"version", 1},
          {"label", label},
          {"backend", {{"kind", "NgramOracle"}, {"identity", "m"}, {"tokenization", "whitespace"}}},
          {"results", {{{"sample_id", "s"}, {"tokens", {"a", "b"}}, {"logprobs", {-bits, -bits}}, {"word_count", 2},
                        {"provenance", "p"}}}},
          {"failures", nlohmann::json::array()}};
}

TEST(Cli, DegenerateBaselinesExitFive) {
  const auto dir = fixtures::scratch_dir("cli-degenerate");
  ASSERT_EQ(probe("synth --out " + q(dir) + " --bootstrap-iterations 50").code, 0);
  write_json(dir / "b.json", score_file("benchmark", 3.0));
  write_json(dir / "m.json", score_file("memorised", 5.0));
  write_json(dir / "c.json", score_file("clean", 4.0));
  const std::string args = "analyze --config " + q(dir / "audit-contaminated.json") + " --benchmark " +
                           q(dir / "b.json") + " --memorised " + q(dir / "m.json") + " --out " + q(dir / "r.json");
  const auto degenerate = probe(args + " --clean " + q(dir / "c.json"));
  EXPECT_EQ(degenerate.code, 5) << degenerate.output;
  EXPECT_NE(read_text(dir / "r.json").find("\"Degenerate\""), std::string::npos);

  write_json(dir / "c2.json", score_file("clean", 7.0));
  const auto ok = probe(args + " --clean " + q(dir / "c2.json"));
  EXPECT_EQ(ok.code, 0) << ok.output;
  EXPECT_NE(read_text(dir / "r.json").find("\"MemorisedLeaning\""), std::string::npos);
}

}  // namespace
