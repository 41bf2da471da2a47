#include "repoqa/bm25.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <stdexcept>

namespace repoqa {

namespace {

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }
bool is_lower(char c) { return c >= 'a' && c <= 'z'; }
bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

void split_identifier(std::string_view word, std::vector<std::string>& out) {
  std::size_t start = 0;
  for (std::size_t i = 1; i < word.size(); ++i) {
    const char prev = word[i - 1];
    const char cur = word[i];
    bool boundary = (is_lower(prev) || std::isdigit(static_cast<unsigned char>(prev))) && is_upper(cur);
    // "HTTPServer": the boundary sits before the last capital of a run.
    if (!boundary && is_upper(prev) && is_upper(cur) && i + 1 < word.size() && is_lower(word[i + 1])) boundary = true;
    if (boundary) {
      out.emplace_back(word.substr(start, i - start));
      start = i;
    }
  }
  out.emplace_back(word.substr(start));
}

template <typename V>
const V* lookup(const std::vector<std::pair<std::string, V>>& sorted, std::string_view key) {
  auto it = std::lower_bound(sorted.begin(), sorted.end(), key,
                             [](const auto& e, std::string_view k) { return std::string_view(e.first) < k; });
  if (it == sorted.end() || it->first != key) return nullptr;
  return &it->second;
}

}  // namespace

std::vector<std::string> bm25_tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_alnum(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_alnum(text[j])) ++j;
    split_identifier(text.substr(i, j - i), tokens);
    i = j;
  }
  for (auto& t : tokens) {
    for (auto& c : t) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return tokens;
}

Bm25Index::Bm25Index(std::vector<RepoPath> paths, const std::vector<std::string>& texts, Bm25Params params)
    : params_(params), paths_(std::move(paths)) {
  if (paths_.size() != texts.size()) throw std::invalid_argument("bm25: paths and texts differ in length");
  std::map<std::string, std::uint32_t> df;
  std::uint64_t total = 0;
  tf_.reserve(paths_.size());
  for (const auto& text : texts) {
    std::map<std::string, std::uint32_t> counts;
    auto tokens = bm25_tokenize(text);
    for (auto& t : tokens) ++counts[std::move(t)];
    lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total += tokens.size();
    for (const auto& [term, _] : counts) ++df[term];
    tf_.emplace_back(counts.begin(), counts.end());
  }
  df_.assign(df.begin(), df.end());
  avgdl_ = paths_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(paths_.size());
}

Bm25Index Bm25Index::from_repo(const RepoSnapshot& snapshot, const RepoContents& contents, Bm25Params params) {
  std::vector<RepoPath> paths;
  std::vector<std::string> texts;
  const auto& files = snapshot.files();
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (i >= contents.by_index.size() || !contents.by_index[i]) continue;
    paths.push_back(files[i].path);
    texts.push_back(files[i].path.str() + "\n" + *contents.by_index[i]);
  }
  return Bm25Index(std::move(paths), texts, params);
}

double Bm25Index::idf(std::string_view term) const {
  const auto* df = lookup(df_, term);
  if (!df) return 0.0;
  const double n = static_cast<double>(paths_.size());
  return std::log(1.0 + (n - *df + 0.5) / (*df + 0.5));
}

double Bm25Index::score(std::size_t doc, const std::vector<std::string>& query_terms) const {
  auto terms = query_terms;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  const double len_norm = avgdl_ > 0 ? static_cast<double>(lengths_[doc]) / avgdl_ : 0.0;
  double total = 0.0;
  for (const auto& t : terms) {
    const auto* tf = lookup(tf_[doc], t);
    if (!tf) continue;
    const double f = *tf;
    total += idf(t) * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * len_norm));
  }
  return total;
}

std::vector<Bm25Hit> Bm25Index::rank(std::string_view query, std::size_t k) const {
  std::vector<Bm25Hit> hits;
  if (paths_.empty() || k == 0) return hits;
  const auto terms = bm25_tokenize(query);
  for (std::size_t d = 0; d < paths_.size(); ++d) {
    const double s = score(d, terms);
    if (s > 0.0) hits.push_back({paths_[d], s});
  }
  std::sort(hits.begin(), hits.end(), [](const Bm25Hit& a, const Bm25Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.path < b.path;
  });
  if (hits.size() > k) hits.erase(hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end());
  return hits;
}

}  // namespace repoqa
