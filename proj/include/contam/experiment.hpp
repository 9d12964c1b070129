#pragma once

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "contam/baselines.hpp"
#include "contam/io.hpp"
#include "contam/ngram.hpp"
#include "contam/synthetic.hpp"

// Writes a self-contained audit setup around a synthetic corpus: an n-gram
// oracle trained on a known subset, two benchmarks (one inside the training
// data, one held out), local-corpus baselines and ready-to-run configs.
namespace contam::synthetic {

struct ExperimentOptions {
  std::uint64_t seed = 7;
  std::size_t bench_size = 50;       // per benchmark
  std::size_t memorised_pool = 300;  // trained-on articles available to the memorised baseline
  std::size_t clean_pool = 100;      // never-trained articles available to the clean baseline
  std::size_t passage_words = 120;
  std::size_t sample_count = 50;
  int order = 3;
  double alpha = 1.0;
  std::size_t bootstrap_iterations = 1000;
};

struct ExperimentLayout {
  std::filesystem::path root;
  std::filesystem::path model;
  std::filesystem::path contaminated_config;
  std::filesystem::path heldout_config;
};

namespace detail {

inline std::string article_path(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "articles/a%05zu.txt", i);
  return buf;
}

inline std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "q%05zu", i);
  return buf;
}

}  // namespace detail

// Article index ranges: [0, B) contaminated benchmark, [B, 2B) held-out
// benchmark, then the memorised pool and the clean pool. The oracle trains
// on the contaminated benchmark articles and the memorised pool.
inline ExperimentLayout write_experiment(const std::filesystem::path& root, const ExperimentOptions& o = {}) {
  namespace fs = std::filesystem;
  const std::size_t B = o.bench_size;
  const std::size_t mem_begin = 2 * B;
  const std::size_t clean_begin = mem_begin + o.memorised_pool;
  const std::size_t total = clean_begin + o.clean_pool;
  const Date train_start = Date::parse("2022-06-01");
  const Date clean_start = Date::parse("2023-06-01");

  std::vector<Article> articles;
  articles.reserve(total);
  for (std::size_t i = 0; i < total; ++i) articles.push_back(generate_article(o.seed, i, o.passage_words + 20));

  const fs::path corpus = root / "corpus";
  nlohmann::json mem_manifest = nlohmann::json::array();
  nlohmann::json clean_manifest = nlohmann::json::array();
  for (std::size_t i = mem_begin; i < total; ++i) {
    io::write_text(corpus / detail::article_path(i), articles[i].text + "\n");
    const bool mem = i < clean_begin;
    const auto created = mem ? add_days(train_start, static_cast<long>((i - mem_begin) % 90))
                             : add_days(clean_start, static_cast<long>((i - clean_begin) % 60));
    (mem ? mem_manifest : clean_manifest).push_back({{"path", detail::article_path(i)}, {"created", created.to_string()}});
  }
  io::write_json(corpus / "memorised.json", mem_manifest);
  io::write_json(corpus / "clean.json", clean_manifest);

  const auto write_bench = [&](const fs::path& path, std::size_t begin) {
    std::string out;
    for (std::size_t i = begin; i < begin + B; ++i) {
      const nlohmann::ordered_json rec = {{"id", detail::sample_id(i)},
                                          {"title", articles[i].title},
                                          {"context", match_length(articles[i].text, o.passage_words)},
                                          {"question", articles[i].question},
                                          {"answers", {articles[i].answer}}};
      out += rec.dump() + "\n";
    }
    io::write_text(path, out);
  };
  write_bench(root / "bench-contaminated.jsonl", 0);
  write_bench(root / "bench-heldout.jsonl", B);

  std::vector<std::vector<std::string>> training;
  for (std::size_t i = 0; i < B; ++i) training.push_back(NgramModel::tokenize(articles[i].text));
  for (std::size_t i = mem_begin; i < clean_begin; ++i) training.push_back(NgramModel::tokenize(articles[i].text));
  const auto model = NgramModel::train(training, o.order, o.alpha);
  io::write_json(root / "model.json", model.to_json());

  const auto config = [&](const std::string& name, const std::string& bench) {
    return nlohmann::json{
        {"name", name},
        {"benchmark", {{"path", bench}, {"format", "ReadingComprehension"}, {"fields", {"context"}}, {"target_words", "infer"}}},
        {"model", {{"preset", "llama"}, {"name", "synthetic-oracle"}, {"backend", "ngram"}, {"model_file", "model.json"}}},
        {"baselines",
         {{"seed", o.seed},
          {"memorised", {{"source", "LocalCorpus"}, {"manifest", "corpus/memorised.json"}, {"sample_count", o.sample_count}}},
          {"clean",
           {{"source", "LocalCorpus"},
            {"manifest", "corpus/clean.json"},
            {"window", {{"start", "2023-06-01"}, {"end", "2023-07-31"}}},
            {"sample_count", o.sample_count}}}}},
        {"analysis", {{"bootstrap_iterations", o.bootstrap_iterations}}},
        {"output", {{"dir", "out-" + name}}}};
  };
  ExperimentLayout layout{root, root / "model.json", root / "audit-contaminated.json", root / "audit-heldout.json"};
  io::write_json(layout.contaminated_config, config("contaminated", "bench-contaminated.jsonl"));
  io::write_json(layout.heldout_config, config("heldout", "bench-heldout.jsonl"));
  return layout;
}

}  // namespace contam::synthetic
