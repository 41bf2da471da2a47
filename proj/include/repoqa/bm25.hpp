#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "repoqa/code_summarizer.hpp"
#include "repoqa/repo_snapshot.hpp"

namespace repoqa {

/// Splits on non-alphanumerics and at camelCase boundaries ("HTTPServer" ->
/// "http", "server"), lowercased. snake_case splits at the underscore.
std::vector<std::string> bm25_tokenize(std::string_view text);

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;
};

struct Bm25Hit {
  RepoPath path;
  double score = 0.0;
};

class Bm25Index {
 public:
  Bm25Index() = default;
  /// `texts[i]` is the document for `paths[i]`.
  Bm25Index(std::vector<RepoPath> paths, const std::vector<std::string>& texts, Bm25Params params = {});

  /// One document per readable file: its path followed by its contents.
  static Bm25Index from_repo(const RepoSnapshot& snapshot, const RepoContents& contents, Bm25Params params = {});

  std::size_t size() const noexcept { return paths_.size(); }
  const std::vector<RepoPath>& paths() const noexcept { return paths_; }

  /// ln(1 + (N - df + 0.5) / (df + 0.5)); 0 for unseen terms.
  double idf(std::string_view term) const;
  /// Score of document `doc` against the unique terms of `query_terms`.
  double score(std::size_t doc, const std::vector<std::string>& query_terms) const;

  /// Top-k documents with a positive score; ties go to the smaller path.
  std::vector<Bm25Hit> rank(std::string_view query, std::size_t k) const;

 private:
  Bm25Params params_;
  std::vector<RepoPath> paths_;
  std::vector<std::vector<std::pair<std::string, std::uint32_t>>> tf_;  // sorted by term
  std::vector<std::uint32_t> lengths_;
  std::vector<std::pair<std::string, std::uint32_t>> df_;  // sorted by term
  double avgdl_ = 0.0;
};

}  // namespace repoqa
