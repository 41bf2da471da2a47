// Serial reference versus OpenMP path for the three parallel kernels.

#include <benchmark/benchmark.h>

#include <map>
#include <random>
#include <string>
#include <vector>

#include "repoqa/bm25.hpp"
#include "repoqa/code_summarizer.hpp"
#include "repoqa/kernels.hpp"

using namespace repoqa;

namespace {

Execution mode(const benchmark::State& state) { return state.range(0) ? Execution::parallel : Execution::serial; }

struct SyntheticRepo {
  RepoSnapshot snapshot;
  RepoContents contents;
};

const SyntheticRepo& repo() {
  static const SyntheticRepo r = [] {
    std::mt19937_64 rng(1);
    std::map<std::string, std::string> files;
    for (int i = 0; i < 400; ++i) {
      std::string body = "\"\"\"Module " + std::to_string(i) + ".\"\"\"\nimport os\n\n";
      for (int c = 0; c < 6; ++c) {
        body += "class Widget" + std::to_string(c) + "(Base):\n    \"\"\"A widget.\"\"\"\n";
        for (int m = 0; m < 8; ++m) {
          body += "    def method_" + std::to_string(m) + "(self, value_" + std::to_string(rng() % 50) +
                  "):\n        \"\"\"Handle cacheEntry lookups.\"\"\"\n        return value\n\n";
        }
      }
      files["pkg" + std::to_string(i % 12) + "/mod" + std::to_string(i) + ".py"] = body;
    }
    std::vector<FileMeta> metas;
    for (const auto& [path, body] : files) {
      metas.push_back({*RepoPath::make(path), "python", body.size(), 0, estimate_tokens(body)});
    }
    RepoSnapshot snap("bench", std::move(metas), files.size());
    auto contents = RepoContents::from_map(snap, files);
    return SyntheticRepo{std::move(snap), std::move(contents)};
  }();
  return r;
}

void BM_SummarizeL3(benchmark::State& state) {
  const auto& r = repo();
  const auto parsers = default_parser_factory();
  for (auto _ : state) {
    auto fine = summarize_l3(r.snapshot, r.contents, parsers, nullptr, mode(state));
    benchmark::DoNotOptimize(fine);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(r.snapshot.files().size()));
}
BENCHMARK(BM_SummarizeL3)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_Bm25RankBatch(benchmark::State& state) {
  const auto& r = repo();
  static const Bm25Index index = Bm25Index::from_repo(r.snapshot, r.contents);
  std::mt19937_64 rng(2);
  std::vector<std::string> queries;
  for (int q = 0; q < 2000; ++q) {
    queries.push_back("where is widget" + std::to_string(rng() % 6) + " method " + std::to_string(rng() % 8) +
                      " value " + std::to_string(rng() % 50) + " handled in mod" + std::to_string(rng() % 400));
  }
  for (auto _ : state) {
    auto hits = bm25_rank_batch(index, queries, 5, mode(state));
    benchmark::DoNotOptimize(hits);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries.size()));
}
BENCHMARK(BM_Bm25RankBatch)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

void BM_ScoreRecords(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::vector<std::vector<std::string>> preds(200000), golds(200000);
  std::vector<ScoreInput> inputs;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (int j = 0, n = static_cast<int>(rng() % 5); j < n; ++j) preds[i].push_back("f" + std::to_string(rng() % 30));
    for (int j = 0, n = 1 + static_cast<int>(rng() % 4); j < n; ++j) golds[i].push_back("f" + std::to_string(rng() % 30));
    inputs.push_back({&preds[i], &golds[i]});
  }
  for (auto _ : state) {
    auto scores = score_records(inputs, mode(state));
    benchmark::DoNotOptimize(scores);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(inputs.size()));
}
BENCHMARK(BM_ScoreRecords)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
