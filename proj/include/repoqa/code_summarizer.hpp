#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repoqa/repo_snapshot.hpp"
#include "repoqa/types.hpp"

namespace repoqa {

// ---- summary data ---------------------------------------------------------

struct ClassEntry {
  std::string name;
  std::vector<std::string> bases;
  // Filled only when SummaryOptions::l2_method_names is set.
  std::vector<std::string> methods;

  friend bool operator==(const ClassEntry&, const ClassEntry&) = default;
};

struct FileEntities {
  std::vector<ClassEntry> classes;
  std::vector<std::string> functions;

  friend bool operator==(const FileEntities&, const FileEntities&) = default;
};

struct FunctionSummary {
  std::string name;
  std::string signature;
  std::optional<std::string> doc_first_line;

  friend bool operator==(const FunctionSummary&, const FunctionSummary&) = default;
};

struct ClassSummary {
  std::string name;
  std::vector<std::string> bases;
  std::optional<std::string> doc_first_line;
  std::vector<FunctionSummary> methods;

  friend bool operator==(const ClassSummary&, const ClassSummary&) = default;
};

struct FileSummary {
  std::optional<std::string> module_doc_first_line;
  std::vector<FunctionSummary> functions;
  std::vector<ClassSummary> classes;

  friend bool operator==(const FileSummary&, const FileSummary&) = default;
};

/// L1: indentation-based folder/file listing.
struct StructureTree {
  std::string rendered;
  std::vector<RepoPath> entries;
};

/// L2: class and module-level function names per file.
struct EntityIndex {
  std::map<RepoPath, FileEntities> per_file;

  nlohmann::ordered_json to_json() const;
  static EntityIndex from_json(const nlohmann::json& doc);
};

/// L3: signatures plus first docstring lines per file.
struct FineSummary {
  std::map<RepoPath, FileSummary> per_file;

  nlohmann::ordered_json to_json() const;
  static FineSummary from_json(const nlohmann::json& doc);
};

struct FileChunk {
  RepoPath path;
  std::uint32_t part_index = 0;
  std::string content;
  std::uint64_t token_estimate = 0;
};

struct SummaryOptions {
  bool l2_method_names = false;
};

// ---- parsers ----------------------------------------------------------------

/// A concrete-syntax parser for one source language. Instances are not
/// thread-safe; use one per worker.
class SourceParser {
 public:
  virtual ~SourceParser() = default;
  virtual std::string_view language() const noexcept = 0;
  /// nullopt when the source does not parse cleanly.
  virtual std::optional<FileEntities> entities(std::string_view source, const SummaryOptions& opts) = 0;
  virtual std::optional<FileSummary> summarize(std::string_view source) = 0;
};

/// tree-sitter backed Python parser.
class PythonParser final : public SourceParser {
 public:
  PythonParser();
  ~PythonParser() override;
  PythonParser(const PythonParser&) = delete;
  PythonParser& operator=(const PythonParser&) = delete;
  PythonParser(PythonParser&&) noexcept;
  PythonParser& operator=(PythonParser&&) noexcept;

  std::string_view language() const noexcept override { return "python"; }
  std::optional<FileEntities> entities(std::string_view source, const SummaryOptions& opts) override;
  std::optional<FileSummary> summarize(std::string_view source) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Returns a fresh parser for `language`, or nullptr when unsupported.
using ParserFactory = std::function<std::unique_ptr<SourceParser>(std::string_view language)>;

/// Python only.
ParserFactory default_parser_factory();

// ---- file contents ----------------------------------------------------------

/// File contents aligned index-for-index with snapshot.files(); nullopt marks
/// a file that could not be read.
struct RepoContents {
  std::vector<std::optional<std::string>> by_index;

  static RepoContents load(const std::filesystem::path& root, const RepoSnapshot& snapshot,
                           Diagnostics* diag = nullptr);
  static RepoContents from_map(const RepoSnapshot& snapshot, const std::map<std::string, std::string>& files);
};

// ---- operations -------------------------------------------------------------

/// Renders `paths` (sorted) as a nested tree, two spaces per level.
/// `annotate`, when set, returns extra lines placed under a file entry.
std::string render_tree(const std::vector<RepoPath>& paths,
                        const std::function<std::vector<std::string>(const RepoPath&)>& annotate = {});

StructureTree summarize_l1(const RepoSnapshot& snapshot);

EntityIndex summarize_l2(const RepoSnapshot& snapshot, const RepoContents& contents,
                         const ParserFactory& parsers, const SummaryOptions& opts = {},
                         Diagnostics* diag = nullptr, Execution exec = Execution::parallel);

FineSummary summarize_l3(const RepoSnapshot& snapshot, const RepoContents& contents,
                         const ParserFactory& parsers, Diagnostics* diag = nullptr,
                         Execution exec = Execution::parallel);

/// Text before the first newline of a docstring body, trimmed; leading blank
/// lines are skipped. nullopt when nothing remains.
std::optional<std::string> docstring_first_line(std::string_view docstring_body);

/// Splits at line boundaries so each chunk stays within `budget` tokens.
/// A single overlong line is cut mid-line (at a UTF-8 boundary when possible).
std::vector<FileChunk> chunk_file(const FileMeta& meta, std::string_view content, std::uint64_t budget);

/// Plain-text block for one file's L3 summary, as shown to generators.
std::string render_file_summary(const RepoPath& path, const FileSummary& summary);

/// Lines placed under a file in the S3 structure view.
std::vector<std::string> render_entity_lines(const FileEntities& entities);

}  // namespace repoqa
