#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repoqa/code_summarizer.hpp"
#include "repoqa/repo_snapshot.hpp"
#include "repoqa/types.hpp"

namespace repoqa {

struct GenConfig {
  std::uint32_t max_qa_per_file = 5;
  std::uint32_t num_questions = 20;
  std::uint32_t q_per_batch = 8;
  std::uint32_t s6_min_files = 2;
  std::uint32_t s6_max_files = 5;
  std::uint64_t context_budget = 6000;
  std::uint64_t seed = 0;

  /// Throws ConfigError when a count is zero or the S6 range leaves [1, 64].
  void validate() const;
};

struct PathBounds {
  std::uint32_t min_paths = 0;
  std::uint32_t max_paths = 0;
};

/// Answer cardinality each strategy's prompt asks for.
PathBounds path_bounds(StrategyId strategy) noexcept;

struct GenerationTask {
  std::string id;
  StrategyId strategy = StrategyId::S1;
  std::string context;
  std::vector<RepoPath> manifest;
  /// Files the task is "about" (the current file for S1/S5, else the manifest).
  std::vector<RepoPath> focus;
  std::uint32_t min_paths = 0;
  std::uint32_t max_paths = 0;
  std::uint32_t max_questions = 0;
  /// Context had to be cut to stay within the budget.
  bool truncated = false;

  nlohmann::ordered_json to_json() const;
  static GenerationTask from_json(const nlohmann::json& doc);
};

struct PromptBundle {
  std::string system;
  std::string user;
};

/// Summaries and contents a strategy may draw on. Pointers that a strategy
/// needs must be non-null.
struct StrategyInputs {
  const RepoSnapshot* snapshot = nullptr;
  const RepoContents* contents = nullptr;  // S1, S6
  const StructureTree* l1 = nullptr;       // S2, S3, S5
  const EntityIndex* l2 = nullptr;         // S3
  const FineSummary* l3 = nullptr;         // S4, S5
};

/// Builds the generation tasks for one strategy. Throws ConfigError when a
/// required summary level or the file contents are missing.
std::vector<GenerationTask> build_tasks(const StrategyInputs& inputs, StrategyId strategy, const GenConfig& cfg,
                                        Diagnostics* diag = nullptr);

/// Substitutes cfg into the strategy's template and appends the context.
PromptBundle render_prompt(const GenerationTask& task, const GenConfig& cfg);

enum class InferenceMode { question_only, with_file_list };

std::string_view to_string(InferenceMode mode) noexcept;
InferenceMode parse_inference_mode(std::string_view text);

/// Unified inference prompt. `file_list_budget` caps the appended listing in
/// with_file_list mode (deeper directories collapse to "dir/ (N files)").
PromptBundle render_inference_prompt(std::string_view question, const RepoSnapshot& snapshot, InferenceMode mode,
                                     std::uint64_t file_list_budget = 4000);

/// System text shared by training export and inference.
std::string_view inference_system_text() noexcept;

/// Sorted path listing that fits `budget` tokens.
std::string render_file_listing(const std::vector<RepoPath>& paths, std::uint64_t budget);

/// Bumped whenever an asset under assets/prompts changes.
inline constexpr std::string_view kPromptTemplateVersion = "1";

}  // namespace repoqa
