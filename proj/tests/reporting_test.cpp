#include "contam/reporting.hpp"

#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fixtures.hpp"

namespace contam {
namespace {

std::vector<PerplexityResult> results(const std::string& prefix, const std::vector<double>& bits) {
  std::vector<PerplexityResult> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    out.push_back({prefix + std::to_string(i), bits[i], 20 + i, 18 + i, prefix + ":" + std::to_string(i)});
  }
  return out;
}

ContaminationReport sample_report(const std::string& name = "squad") {
  AnalysisOptions o;
  o.bootstrap_iterations = 100;
  o.seed = 3;
  o.benchmark_name = name;
  o.config_fingerprint = "0123456789abcdef";
  return compare(results("b", {2.4, 2.7, 2.5}), results("m", {3.0, 3.1, 2.9, 3.3}),
                 results("c", {5.1, 4.9, 5.4, 4.6, 5.0}), o);
}

std::size_t line_count(const std::string& s) {
  std::size_t n = 0;
  for (char c : s) n += c == '\n' ? 1 : 0;
  return n;
}

TEST(ReportJson, RoundTrip) {
  const auto r = sample_report();
  EXPECT_EQ(report_from_json(to_json(r)), r);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(to_json(r).dump())), r);
  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema_version"), kReportSchemaVersion);
  EXPECT_EQ(j.at("verdict"), "MemorisedLeaning");
  EXPECT_EQ(j.at("bootstrap").at("iterations"), 100);
}

TEST(ReportJson, DegenerateScoreIsNull) {
  AnalysisOptions o;
  o.bootstrap_iterations = 10;
  const auto r = compare(results("b", {1.0}), results("m", {4.0}), results("c", {3.0}), o);
  const auto j = to_json(r);
  EXPECT_TRUE(j.at("score").is_null());
  EXPECT_EQ(report_from_json(j), r);
}

TEST(ReportJson, RejectsOtherSchemaVersion) {
  auto j = to_json(sample_report());
  j["schema_version"] = 2;
  EXPECT_THROW(report_from_json(j), Error);
}

TEST(ReportCsv, OneRowPerSample) {
  const auto r = sample_report();
  const auto csv = report_csv(r);
  EXPECT_EQ(line_count(csv), 1u + 3u + 4u + 5u);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "label,sample_id,bits_per_token,word_count,provenance");
  EXPECT_NE(csv.find("\nmemorised,m0,3.0,18,m:0\n"), std::string::npos);
}

TEST(ReportCsv, QuotesSpecialCharacters) {
  auto r = sample_report();
  r.benchmark.per_sample[0].sample_id = "a,\"b\"";
  EXPECT_NE(report_csv(r).find("\"a,\"\"b\"\"\""), std::string::npos);
}

TEST(ReportMarkdown, ContainsSummary) {
  const auto md = report_markdown(sample_report("squad"));
  EXPECT_NE(md.find("# Contamination report: squad"), std::string::npos);
  EXPECT_NE(md.find("| benchmark | 3 |"), std::string::npos);
  EXPECT_NE(md.find("| clean | 5 |"), std::string::npos);
  EXPECT_NE(md.find("verdict: **MemorisedLeaning**"), std::string::npos);
  EXPECT_NE(md.find("`0123456789abcdef`"), std::string::npos);
  EXPECT_NE(md.find("## Caveats"), std::string::npos);
}

TEST(PlotData, ThreeRowsPerReport) {
  const std::vector<ContaminationReport> reports{sample_report("a"), sample_report("b"), sample_report("c")};
  const auto csv = plot_data_csv(reports);
  EXPECT_EQ(line_count(csv), 1u + 9u);
  EXPECT_NE(csv.find("\nb,memorised,"), std::string::npos);
  EXPECT_THROW(plot_data_csv({}), Error);
}

TEST(Emit, WritesEachFormat) {
  const auto dir = fixtures::scratch_dir("emit");
  const auto r = sample_report();
  emit_report(r, ReportFormat::Json, dir / "r.json");
  emit_report(r, ReportFormat::Csv, dir / "nested" / "r.csv");
  emit_report(r, ReportFormat::Markdown, dir / "r.md");
  EXPECT_EQ(report_from_json(io::read_json(dir / "r.json")), r);
  EXPECT_EQ(io::read_text(dir / "nested" / "r.csv"), report_csv(r));
  EXPECT_EQ(io::read_text(dir / "r.md"), report_markdown(r));
  emit_plot_data({r}, dir / "plot.csv");
  EXPECT_EQ(line_count(io::read_text(dir / "plot.csv")), 4u);
}

TEST(Emit, UnwritableDestination) {
  const auto dir = fixtures::scratch_dir("unwritable");
  io::write_text(dir / "file", "x");
  try {
    emit_report(sample_report(), ReportFormat::Json, dir / "file" / "report.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::IoError);
  }
}

TEST(ReportFormatNames, Parse) {
  EXPECT_EQ(parse_report_format("json"), ReportFormat::Json);
  EXPECT_EQ(parse_report_format("csv"), ReportFormat::Csv);
  EXPECT_EQ(parse_report_format("md"), ReportFormat::Markdown);
  EXPECT_EQ(parse_report_format("markdown"), ReportFormat::Markdown);
  EXPECT_THROW(parse_report_format("xml"), Error);
}

TEST(Surprisal, AllEqualInBottomBucket) {
  const auto m = surprisal_map({"s", {"a", "b", "c", "d"}, {-1.5, -1.5, -1.5, -1.5}});
  EXPECT_EQ(m.bucket, (std::vector<int>{0, 0, 0, 0}));
  EXPECT_DOUBLE_EQ(m.mean_bits(), 1.5);
}

TEST(Surprisal, ExtremesSpanAllBuckets) {
  const auto m = surprisal_map({"s", {"a", "b"}, {0.0, -10.0}});
  EXPECT_EQ(m.bits, (std::vector<double>{0.0, 10.0}));
  EXPECT_EQ(m.bucket, (std::vector<int>{0, 4}));
}

TEST(Surprisal, BucketsMonotoneInSurprisal) {
  std::vector<double> lp;
  std::vector<std::string> tokens;
  for (int i = 0; i < 50; ++i) {
    lp.push_back(-static_cast<double>((i * 37) % 50) / 5.0);
    tokens.push_back("t" + std::to_string(i));
  }
  const auto m = surprisal_map({"s", tokens, lp});
  for (std::size_t i = 0; i < lp.size(); ++i) {
    for (std::size_t j = 0; j < lp.size(); ++j) {
      if (m.bits[i] < m.bits[j]) {
        EXPECT_LE(m.bucket[i], m.bucket[j]);
      }
    }
  }
  EXPECT_EQ(*std::min_element(m.bucket.begin(), m.bucket.end()), 0);
  EXPECT_EQ(*std::max_element(m.bucket.begin(), m.bucket.end()), 4);
}

TEST(Surprisal, RelabellingTokensKeepsBuckets) {
  const auto a = surprisal_map({"s", {"a", "b", "c"}, {-0.1, -3.0, -7.0}});
  const auto b = surprisal_map({"s", {"x", "y", "z"}, {-0.1, -3.0, -7.0}});
  EXPECT_EQ(a.bucket, b.bucket);
}

TEST(Surprisal, EmptyRejected) {
  EXPECT_THROW(surprisal_map({"s", {}, {}}), Error);
}

TEST(SurprisalHtml, SelfContainedAndEscaped) {
  const auto m = surprisal_map({"<id>", {"a&b", "<c>"}, {-1.0, -2.0}});
  const auto html = surprisal_html({m}, "Map \"1\"");
  EXPECT_EQ(html.rfind("<!DOCTYPE html>", 0), 0u);
  EXPECT_NE(html.find("a&amp;b"), std::string::npos);
  EXPECT_NE(html.find("&lt;c&gt;"), std::string::npos);
  EXPECT_NE(html.find("&lt;id&gt;"), std::string::npos);
  EXPECT_NE(html.find("Map &quot;1&quot;"), std::string::npos);
  EXPECT_EQ(html.find("<script"), std::string::npos);
  EXPECT_EQ(html.find("http"), std::string::npos);
  EXPECT_NE(html.find("class=\"t s4\""), std::string::npos);
}

}  // namespace
}  // namespace contam
