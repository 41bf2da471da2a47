#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "repoqa/bm25.hpp"
#include "repoqa/kernels.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;

namespace {

// Closed-form BM25 term weight.
double term_score(double n, double df, double tf, double len, double avgdl) {
  const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
  return idf * tf * 2.2 / (tf + 1.2 * (1.0 - 0.75 + 0.75 * len / avgdl));
}

}  // namespace

TEST(Bm25Tokenize, SplitsIdentifiers) {
  EXPECT_EQ(bm25_tokenize("HTTPServer.handle_request(fooBar2)"),
            (std::vector<std::string>{"http", "server", "handle", "request", "foo", "bar2"}));
  EXPECT_EQ(bm25_tokenize("LRUCache hit_ratio"), (std::vector<std::string>{"lru", "cache", "hit", "ratio"}));
  EXPECT_TRUE(bm25_tokenize("  -- !! ").empty());
}

TEST(Bm25, HandComputedScores) {
  Bm25Index index(rps({"a.py", "b.py"}), {"cache cache cache data", "cache data data data"});
  // N=2, df(cache)=2, idf=ln(1.2); equal lengths so the length norm is 1.
  const double a = term_score(2, 2, 3, 4, 4), b = term_score(2, 2, 1, 4, 4);
  EXPECT_NEAR(a, 0.286505, 1e-6);
  EXPECT_NEAR(b, 0.182322, 1e-6);
  EXPECT_NEAR(index.score(0, {"cache"}), a, 1e-12);
  EXPECT_NEAR(index.score(1, {"cache"}), b, 1e-12);
  EXPECT_NEAR(index.score(0, {"cache", "cache"}), a, 1e-12);
  auto hits = index.rank("cache", 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].path.str(), "a.py");
  EXPECT_EQ(hits[1].path.str(), "b.py");
  EXPECT_NEAR(index.idf("cache"), std::log(1.2), 1e-15);
  EXPECT_EQ(index.idf("zzz"), 0.0);
}

TEST(Bm25, UniqueTokenWinsAndUnknownIsEmpty) {
  Bm25Index index(rps({"a.py", "b.py", "c.py"}), {"alpha beta", "beta gamma", "gamma zebra delta"});
  auto hits = index.rank("zebra", 3);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].path.str(), "c.py");
  EXPECT_TRUE(index.rank("unknownword", 3).empty());
  EXPECT_TRUE(Bm25Index().rank("alpha", 3).empty());
}

TEST(Bm25, TiesGoToSmallerPath) {
  Bm25Index index(rps({"z.py", "m.py", "a.py"}), {"token other", "token other", "token other"});
  auto hits = index.rank("token", 2);
  ASSERT_EQ(hits.size(), 2u);
  EXPECT_EQ(hits[0].path.str(), "a.py");
  EXPECT_EQ(hits[1].path.str(), "m.py");
}

TEST(Bm25, MatchesClosedFormOnRandomCorpus) {
  std::mt19937_64 rng(4);
  const std::vector<std::string> vocab{"alpha", "beta", "gamma", "delta", "eps", "zeta"};
  std::vector<std::vector<std::string>> docs(25);
  std::vector<std::string> texts;
  std::vector<RepoPath> paths;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    for (std::uint64_t j = 0, n = 1 + uniform_below(rng, 12); j < n; ++j) docs[i].push_back(vocab[uniform_below(rng, 6)]);
    std::string t;
    for (const auto& w : docs[i]) t += w + " ";
    texts.push_back(t);
    paths.push_back(rp("f" + std::to_string(100 + i) + ".py"));
  }
  Bm25Index index(paths, texts);
  double avgdl = 0;
  for (const auto& d : docs) avgdl += static_cast<double>(d.size());
  avgdl /= static_cast<double>(docs.size());
  for (const auto& term : vocab) {
    double df = 0;
    for (const auto& d : docs) df += std::count(d.begin(), d.end(), term) > 0;
    for (std::size_t i = 0; i < docs.size(); ++i) {
      const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
      const double expect = tf == 0 ? 0.0 : term_score(25, df, tf, static_cast<double>(docs[i].size()), avgdl);
      EXPECT_NEAR(index.score(i, {term}), expect, 1e-12) << term << " " << i;
    }
  }
}

TEST(Bm25, FromRepoIndexesPathText) {
  std::map<std::string, std::string> files{{"pkg/cache.py", "x = 1\n"}, {"pkg/other.py", "y = 2\n"}};
  auto snap = make_snapshot(files);
  auto index = Bm25Index::from_repo(snap, RepoContents::from_map(snap, files));
  EXPECT_EQ(index.size(), 2u);
  auto hits = index.rank("cache", 1);
  ASSERT_EQ(hits.size(), 1u);
  EXPECT_EQ(hits[0].path.str(), "pkg/cache.py");
}

TEST(Kernels, Bm25BatchSerialEqualsParallel) {
  std::vector<RepoPath> paths;
  std::vector<std::string> texts;
  std::mt19937_64 rng(6);
  for (int i = 0; i < 60; ++i) {
    paths.push_back(rp("m" + std::to_string(i) + ".py"));
    std::string t;
    for (int w = 0; w < 30; ++w) t += "w" + std::to_string(uniform_below(rng, 40)) + " ";
    texts.push_back(t);
  }
  Bm25Index index(paths, texts);
  std::vector<std::string> queries;
  for (int q = 0; q < 200; ++q) queries.push_back("w" + std::to_string(uniform_below(rng, 40)) + " w" + std::to_string(uniform_below(rng, 40)));
  auto s = bm25_rank_batch(index, queries, 5, Execution::serial);
  auto p = bm25_rank_batch(index, queries, 5, Execution::parallel);
  ASSERT_EQ(s.size(), queries.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    ASSERT_EQ(s[i].size(), p[i].size());
    auto single = index.rank(queries[i], 5);
    ASSERT_EQ(single.size(), s[i].size());
    for (std::size_t j = 0; j < s[i].size(); ++j) {
      EXPECT_EQ(s[i][j].path, p[i][j].path);
      EXPECT_EQ(s[i][j].score, p[i][j].score);
      EXPECT_EQ(single[j].path, s[i][j].path);
    }
  }
}
