#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "repoqa/types.hpp"

namespace repoqa {

/// Repository-root-relative path with UNIX separators.
///
/// Always nonempty, never absolute, no backslashes, no "." / ".." or empty
/// segments. Ordering is plain byte-lexicographic.
class RepoPath {
 public:
  /// Returns nullopt when `text` violates any invariant.
  static std::optional<RepoPath> make(std::string_view text);

  const std::string& str() const noexcept { return value_; }
  std::string_view view() const noexcept { return value_; }

  /// Final segment, e.g. "app.py".
  std::string_view filename() const noexcept;
  /// Everything before the final "/", or "" for root-level files.
  std::string_view parent() const noexcept;
  /// Filename without its last extension, e.g. "app".
  std::string_view stem() const noexcept;

  friend bool operator==(const RepoPath&, const RepoPath&) = default;
  friend std::strong_ordering operator<=>(const RepoPath& a, const RepoPath& b) noexcept {
    return a.value_.compare(b.value_) <=> 0;
  }

 private:
  explicit RepoPath(std::string value) : value_(std::move(value)) {}
  std::string value_;
};

struct FileMeta {
  RepoPath path;
  std::string language;
  std::uint64_t byte_size = 0;
  std::uint64_t line_count = 0;
  std::uint64_t token_estimate = 0;
};

struct ScanConfig {
  std::set<std::string> extensions{".py"};
  std::set<std::string> ignored_dirs{".git", ".tox", ".venv", "node_modules", "__pycache__"};
};

/// Immutable path universe of one repository.
class RepoSnapshot {
 public:
  RepoSnapshot() = default;
  /// Sorts `files` and rejects duplicates or code_files_used > total.
  RepoSnapshot(std::string label, std::vector<FileMeta> files, std::uint64_t total_files_seen);

  const std::string& label() const noexcept { return label_; }
  const std::vector<FileMeta>& files() const noexcept { return files_; }
  std::uint64_t total_files_seen() const noexcept { return total_files_seen_; }
  std::uint64_t code_files_used() const noexcept { return files_.size(); }

  bool contains(std::string_view path) const noexcept;
  const FileMeta* find(std::string_view path) const noexcept;
  std::vector<RepoPath> paths() const;

  nlohmann::ordered_json to_json() const;
  static RepoSnapshot from_json(const nlohmann::json& doc);

 private:
  std::string label_;
  std::vector<FileMeta> files_;
  std::uint64_t total_files_seen_ = 0;
};

/// Fatal scan failure (root missing or unreadable).
class ScanError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Walks `root` without following symlinks. Unreadable files are reported in
/// `diag`, counted in total_files_seen and left out of the universe.
RepoSnapshot scan_repository(const std::filesystem::path& root, const ScanConfig& filter,
                             Diagnostics* diag = nullptr);

/// Reads the current on-disk content of a snapshot member.
std::optional<std::string> read_file_content(const std::filesystem::path& root, const RepoPath& path);

struct NormalizedPath {
  std::string text;
  bool member = false;
};

struct PathRejection {
  std::string reason;
};

using NormalizeResult = std::variant<NormalizedPath, PathRejection>;

/// Canonicalises a model-emitted path against the universe: trims, converts
/// backslashes, strips "./" and drops one leading repo-label folder when that
/// turns a non-member into a member.
NormalizeResult normalize_path(std::string_view raw, const RepoSnapshot& snapshot);

/// ceil(bytes / 4).
constexpr std::uint64_t estimate_tokens(std::uint64_t byte_length) noexcept {
  return (byte_length + 3) / 4;
}
inline std::uint64_t estimate_tokens(std::string_view text) noexcept {
  return estimate_tokens(static_cast<std::uint64_t>(text.size()));
}

std::string language_for_extension(std::string_view extension);

}  // namespace repoqa
