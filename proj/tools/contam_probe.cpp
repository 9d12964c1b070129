// contam-probe: perplexity-based benchmark contamination audits.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "contam/config.hpp"
#include "contam/experiment.hpp"
#include "contam/io.hpp"
#include "contam/ngram.hpp"
#include "contam/pipeline.hpp"
#include "contam/reporting.hpp"
#include "contam/version.hpp"

namespace fs = std::filesystem;
using namespace contam;

namespace {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfig = 2,
  kNetwork = 3,
  kBackend = 4,
  kDegenerate = 5,
};

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::ConfigError:
    case Errc::InvalidThresholds: return kConfig;
    case Errc::NetworkError: return kNetwork;
    case Errc::DegenerateBaselines: return kDegenerate;
    default: break;
  }
  if (e.stage() == "baselines" &&
      (e.code() == Errc::HttpError || e.code() == Errc::RateLimited || e.code() == Errc::BackendUnavailable)) {
    return kNetwork;
  }
  if (e.stage() == "scoring") return kBackend;
  return kFailure;
}

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> resample;
  bool offline = false;
  std::string out;
};

nlohmann::json to_patch(const Overrides& o) {
  nlohmann::json p = nlohmann::json::object();
  if (o.seed) p["baselines"]["seed"] = *o.seed;
  if (o.resample) p["baselines"]["resample"] = *o.resample;
  if (o.offline) p["offline"] = true;
  if (!o.out.empty()) p["output"]["dir"] = fs::absolute(o.out).string();
  return p;
}

void add_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--seed", o.seed, "Override baselines.seed (also seeds the bootstrap)");
  cmd->add_option("--resample", o.resample, "Number of baseline draws per label")->check(CLI::PositiveNumber);
  cmd->add_flag("--offline", o.offline, "Serve all fetches from the cache; fail on a miss");
}

SetLabel label_of(BaselineLabel l) { return l == BaselineLabel::Memorised ? SetLabel::Memorised : SetLabel::Clean; }

bool is_baseline_bundle(const fs::path& p) {
  if (p.extension() != ".json") return false;
  const auto j = io::read_json(p);
  return j.is_object() && j.value("format", "") == "contam-baselines";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Perplexity-based benchmark contamination audits", "contam-probe"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  // run
  std::string config_path;
  Overrides ov;
  auto* run = app.add_subcommand("run", "Run a full audit from a config file");
  run->add_option("--config", config_path, "Audit config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", ov.out, "Override output.dir");
  add_overrides(run, ov);

  // verbalize
  std::string v_input, v_format, v_template_file, v_out;
  std::vector<std::string> v_fields;
  bool v_lenient = false;
  auto* verb = app.add_subcommand("verbalize", "Turn benchmark records into sequences");
  verb->add_option("--config", config_path, "Audit config; supplies format, fields and template");
  verb->add_option("--input", v_input, "Benchmark NDJSON (overrides the config)");
  verb->add_option("--format", v_format, "ReadingComprehension | Summarisation | MultiChoice | RawText");
  verb->add_option("--fields", v_fields, "Field policy (default: every template field)");
  verb->add_option("--template-file", v_template_file, "JSON mapping format name to template pattern");
  verb->add_flag("--lenient", v_lenient, "Skip malformed samples instead of failing");
  verb->add_option("--out", v_out, "Sequence file (NDJSON)")->required();

  // build-baseline
  std::string b_label, b_sequences, b_out;
  auto* build = app.add_subcommand("build-baseline", "Build the memorised or clean baseline");
  build->add_option("--config", config_path, "Audit config")->required()->check(CLI::ExistingFile);
  build->add_option("--label", b_label, "memorised | clean")->required();
  build->add_option("--sequences", b_sequences, "Benchmark sequence file from 'verbalize'")->required();
  build->add_option("--out", b_out, "Baseline bundle (JSON)")->required();
  add_overrides(build, ov);

  // score
  std::string s_backend = "ngram", s_input, s_label, s_out, s_model_file, s_endpoint, s_model, s_key_env;
  std::size_t s_in_flight = 4, s_max_ctx = 0;
  bool s_lenient = false;
  auto* score = app.add_subcommand("score", "Score a sequence file or baseline bundle");
  score->add_option("--config", config_path, "Audit config; supplies backend settings");
  score->add_option("--backend", s_backend, "ngram | remote")->check(CLI::IsMember({"ngram", "remote"}));
  score->add_option("--input", s_input, "Sequence file or baseline bundle")->required()->check(CLI::ExistingFile);
  score->add_option("--label", s_label, "benchmark | memorised | clean (default: from the input)");
  score->add_option("--out", s_out, "Score file (JSON)")->required();
  score->add_option("--model-file", s_model_file, "N-gram model (JSON)");
  score->add_option("--endpoint", s_endpoint, "Completions endpoint base URL");
  score->add_option("--model", s_model, "Model name (remote) or display name (ngram)");
  score->add_option("--api-key-env", s_key_env, "Environment variable holding the API key");
  score->add_option("--max-in-flight", s_in_flight, "Concurrent requests")->check(CLI::PositiveNumber);
  score->add_option("--max-context-tokens", s_max_ctx, "Reject longer sequences (0 = unlimited)");
  score->add_flag("--lenient", s_lenient, "Record failures and continue");

  // analyze
  std::string a_bench, a_mem, a_clean, a_out;
  auto* analyze = app.add_subcommand("analyze", "Compare three score files");
  analyze->add_option("--config", config_path, "Audit config")->required()->check(CLI::ExistingFile);
  analyze->add_option("--benchmark", a_bench, "Benchmark scores")->required()->check(CLI::ExistingFile);
  analyze->add_option("--memorised", a_mem, "Memorised-baseline scores")->required()->check(CLI::ExistingFile);
  analyze->add_option("--clean", a_clean, "Clean-baseline scores")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", a_out, "Report (JSON)")->required();
  analyze->add_option("--seed", ov.seed, "Override baselines.seed");

  // report
  std::vector<std::string> r_inputs, r_scores;
  std::string r_format = "markdown", r_out, r_plot, r_html;
  auto* report = app.add_subcommand("report", "Render reports, plot data and surprisal maps");
  report->add_option("--input", r_inputs, "Report JSON file(s)")->required()->check(CLI::ExistingFile);
  report->add_option("--format", r_format, "json | csv | markdown");
  report->add_option("--out", r_out, "Rendered report of the first input");
  report->add_option("--plot-data", r_plot, "Grouped-bar CSV over all inputs");
  report->add_option("--surprisal", r_html, "Surprisal HTML built from --scores");
  report->add_option("--scores", r_scores, "Score files for --surprisal")->check(CLI::ExistingFile);

  // train-ngram
  std::vector<std::string> t_files;
  std::string t_manifest, t_out;
  int t_order = 3;
  double t_alpha = 1.0;
  auto* train = app.add_subcommand("train-ngram", "Train the reference n-gram model");
  train->add_option("--manifest", t_manifest, "Local-corpus manifest; every listed file is used");
  train->add_option("--files", t_files, "Plain-text training files")->check(CLI::ExistingFile);
  train->add_option("--order", t_order, "n")->check(CLI::PositiveNumber);
  train->add_option("--alpha", t_alpha, "Add-alpha smoothing constant");
  train->add_option("--out", t_out, "Model file (JSON)")->required();

  // synth
  std::string y_out;
  synthetic::ExperimentOptions y_opts;
  auto* synth = app.add_subcommand("synth", "Write the synthetic oracle experiment");
  synth->add_option("--out", y_out, "Destination directory")->required();
  synth->add_option("--seed", y_opts.seed, "Generator and baseline seed");
  synth->add_option("--bootstrap-iterations", y_opts.bootstrap_iterations, "Bootstrap iterations in the configs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*run) {
      const auto cfg = load_config(config_path, to_patch(ov));
      const auto result = run_audit(cfg, &std::cerr);
      std::cout << summary_paragraph(result.report) << "\n";
      for (const auto& p : result.written) std::cerr << "wrote " << p.string() << "\n";
      return result.report.verdict == Verdict::Degenerate ? kDegenerate : kOk;
    }

    if (*verb) {
      std::vector<VerbalizedSequence> seqs;
      std::vector<std::string> errors;
      if (!config_path.empty()) {
        auto cfg = load_config(config_path);
        if (!v_input.empty()) cfg.benchmark_path = v_input;
        if (v_lenient) cfg.lenient = true;
        seqs = verbalize_stage(cfg, &errors);
      } else {
        if (v_input.empty() || v_format.empty()) fail(Errc::ConfigError, "verbalize needs --config or --input and --format");
        const Format f = parse_format(v_format);
        auto tmpl = builtin_template(f);
        if (!v_template_file.empty()) {
          const auto overrides = parse_template_overrides(io::read_json(v_template_file));
          if (const auto it = overrides.find(f); it != overrides.end()) tmpl = it->second;
        }
        const FieldPolicy policy = v_fields.empty() ? tmpl.field_policy() : FieldPolicy(v_fields.begin(), v_fields.end());
        auto outcome = verbalize_dataset(load_benchmark(v_input, f), tmpl, policy, v_lenient);
        seqs = std::move(outcome.sequences);
        for (const auto& [id, msg] : outcome.errors) errors.push_back(id + ": " + msg);
      }
      for (const auto& e : errors) std::cerr << "skipped: " << e << "\n";
      io::write_text(v_out, to_ndjson(seqs));
      std::cerr << "wrote " << seqs.size() << " sequences to " << v_out << "\n";
      return kOk;
    }

    if (*build) {
      const auto cfg = load_config(config_path, to_patch(ov));
      const auto seqs = parse_sequences(io::read_text(b_sequences));
      const auto sets = baseline_stage(cfg, parse_label(b_label), seqs, &std::cerr);
      io::write_json(b_out, baselines_to_json(sets));
      return kOk;
    }

    if (*score) {
      std::unique_ptr<ScorerBackend> backend;
      BatchOptions opts{s_in_flight, s_lenient, 0};
      if (!config_path.empty()) {
        const auto cfg = load_config(config_path);
        backend = make_backend(cfg);
        opts = batch_options(cfg);
      } else if (s_backend == "ngram") {
        if (s_model_file.empty()) fail(Errc::ConfigError, "--backend ngram needs --model-file");
        auto model = std::make_shared<const NgramModel>(NgramModel::from_json(io::read_json(s_model_file)));
        backend = std::make_unique<NgramBackend>(model, s_max_ctx,
                                                 s_model.empty() ? fs::path(s_model_file).filename().string() : s_model);
      } else {
        RemoteConfig rc;
        rc.endpoint = s_endpoint;
        rc.model = s_model;
        rc.api_key_env = s_key_env;
        backend = std::make_unique<RemoteBackend>(rc);
      }
      LabelledSequences input;
      SetLabel label = SetLabel::Benchmark;
      if (is_baseline_bundle(s_input)) {
        const auto sets = baselines_from_json(io::read_json(s_input));
        if (sets.empty()) fail(Errc::EmptyDataset, "baseline bundle has no sets");
        label = label_of(sets.front().spec.label);
        input = baseline_inputs(sets);
      } else {
        input = benchmark_inputs(parse_sequences(io::read_text(s_input)));
      }
      if (!s_label.empty()) label = parse_set_label(s_label);
      const auto file = score_stage(*backend, label, input, opts);
      for (const auto& f : file.failures) std::cerr << "failed: " << f.sample_id << ": " << f.message << "\n";
      io::write_json(s_out, to_json(file));
      return kOk;
    }

    if (*analyze) {
      const auto cfg = load_config(config_path, to_patch(ov));
      const auto rep = analyze_stage(cfg, score_file_from_json(io::read_json(a_bench)),
                                     score_file_from_json(io::read_json(a_mem)),
                                     score_file_from_json(io::read_json(a_clean)));
      emit_report(rep, ReportFormat::Json, a_out);
      std::cout << summary_paragraph(rep) << "\n";
      return rep.verdict == Verdict::Degenerate ? kDegenerate : kOk;
    }

    if (*report) {
      std::vector<ContaminationReport> reports;
      for (const auto& p : r_inputs) reports.push_back(report_from_json(io::read_json(p)));
      const auto format = parse_report_format(r_format);
      if (r_out.empty()) {
        std::cout << render_report(reports.front(), format);
      } else {
        emit_report(reports.front(), format, r_out);
      }
      if (!r_plot.empty()) emit_plot_data(reports, r_plot);
      if (!r_html.empty()) {
        if (r_scores.empty()) fail(Errc::ConfigError, "--surprisal needs --scores");
        std::vector<ScoreFile> files;
        for (const auto& p : r_scores) files.push_back(score_file_from_json(io::read_json(p)));
        std::vector<const ScoreFile*> ptrs;
        for (const auto& f : files) ptrs.push_back(&f);
        io::write_text(r_html, surprisal_html(surprisal_maps(ptrs), "Token surprisal: " + reports.front().benchmark_name));
      }
      return kOk;
    }

    if (*train) {
      std::vector<fs::path> paths;
      if (!t_manifest.empty()) {
        const auto doc = io::read_json(t_manifest);
        for (const auto& e : doc) paths.push_back(fs::path(t_manifest).parent_path() / e.at("path").get<std::string>());
      }
      for (const auto& f : t_files) paths.emplace_back(f);
      std::vector<std::vector<std::string>> corpus;
      for (const auto& p : paths) corpus.push_back(NgramModel::tokenize(io::read_text(p)));
      const auto model = NgramModel::train(corpus, t_order, t_alpha);
      io::write_json(t_out, model.to_json());
      std::cerr << "trained " << t_order << "-gram model on " << corpus.size() << " documents, |V| = "
                << model.vocabulary().size() << "\n";
      return kOk;
    }

    if (*synth) {
      const auto layout = synthetic::write_experiment(y_out, y_opts);
      std::cout << layout.contaminated_config.string() << "\n" << layout.heldout_config.string() << "\n";
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "contam-probe: " << (e.stage().empty() ? "" : "[" + e.stage() + "] ") << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "contam-probe: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
