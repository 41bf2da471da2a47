#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "repoqa/repo_snapshot.hpp"

namespace repoqa::testing {

inline RepoPath rp(std::string_view text) {
  auto p = RepoPath::make(text);
  if (!p) throw std::invalid_argument("bad test path: " + std::string(text));
  return *p;
}

inline std::vector<RepoPath> rps(const std::vector<std::string>& texts) {
  std::vector<RepoPath> out;
  for (const auto& t : texts) out.push_back(rp(t));
  return out;
}

/// In-memory snapshot whose files have the given contents.
inline RepoSnapshot make_snapshot(const std::map<std::string, std::string>& files, std::string label = "repo") {
  std::vector<FileMeta> metas;
  for (const auto& [path, content] : files) {
    FileMeta m{rp(path), "python", content.size(), 0, estimate_tokens(content)};
    for (char c : content) m.line_count += c == '\n';
    metas.push_back(std::move(m));
  }
  return RepoSnapshot(std::move(label), std::move(metas), files.size());
}

inline RepoSnapshot make_snapshot(const std::vector<std::string>& paths, std::string label = "repo") {
  std::map<std::string, std::string> files;
  for (const auto& p : paths) files[p] = "";
  return make_snapshot(files, std::move(label));
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "repoqa") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

  void write(const std::string& rel, const std::string& content) const {
    auto p = path_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
  }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path fixture_repo() { return REPOQA_FIXTURE_DIR; }

}  // namespace repoqa::testing
