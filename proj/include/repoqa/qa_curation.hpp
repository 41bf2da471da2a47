#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repoqa/generation_client.hpp"
#include "repoqa/repo_snapshot.hpp"
#include "repoqa/strategy_engine.hpp"
#include "repoqa/types.hpp"

namespace repoqa {

/// One supervised example: a question and its sorted, unique gold path set.
struct QaPair {
  std::string id;
  std::string question;
  std::vector<RepoPath> answer_paths;
  StrategyId strategy = StrategyId::S1;
  std::string task_id;

  friend bool operator==(const QaPair&, const QaPair&) = default;

  /// {"id","question","answer_paths","strategy","task_id"}
  nlohmann::ordered_json to_json() const;
  static QaPair from_json(const nlohmann::json& doc);
};

/// Content hash of (question, answers, strategy); 32 hex chars.
std::string make_pair_id(std::string_view question, const std::vector<RepoPath>& answers, StrategyId strategy);

/// Trims and collapses internal whitespace runs to one space.
std::string normalize_question(std::string_view question);

enum class PathPolicy { strict, repair };

struct ValidationPolicy {
  PathPolicy paths = PathPolicy::strict;
  /// Pairs whose answer set ends up empty are dropped unless this is set.
  bool keep_empty_answers = false;
};

struct ValidationOutcome {
  std::optional<QaPair> pair;
  std::string reason;  // set when pair is empty
  std::uint64_t dropped_paths = 0;
};

/// Normalises the item's paths against the snapshot and the task manifest,
/// then checks the task's cardinality bounds. Rejection reasons:
/// empty_question, unknown_path, outside_manifest, cardinality, empty_answer.
ValidationOutcome validate_item(const GeneratedItem& item, const GenerationTask& task, const RepoSnapshot& snapshot,
                                const ValidationPolicy& policy);

struct CurationReport {
  std::uint64_t items_in = 0;
  std::uint64_t accepted = 0;
  std::map<std::string, std::uint64_t> rejected_by_reason;
  std::uint64_t dropped_paths = 0;
  std::uint64_t dedup_removed = 0;
  std::map<std::string, std::uint64_t> balance_removed_per_strategy;
  std::uint64_t orphan_completions = 0;
  std::uint64_t final_pairs = 0;
  ValidityStats validity;

  std::uint64_t rejected_total() const noexcept;
  nlohmann::ordered_json to_json() const;
};

struct NearDupPolicy {
  bool enabled = true;
  double threshold = 0.85;
};

/// Lowercased alphanumeric word tokens.
std::vector<std::string> question_tokens(std::string_view question);

/// Jaccard similarity of the word-trigram sets of two questions. Questions
/// shorter than three tokens compare as 1 when their token lists match, else 0.
double trigram_jaccard(std::string_view a, std::string_view b);

/// Removes exact duplicates (case-folded, whitespace-collapsed question plus
/// answer set) and near duplicates (same answers, trigram Jaccard >= threshold).
/// Keeps first occurrences in input order; idempotent.
std::vector<QaPair> dedup(const std::vector<QaPair>& pairs, const NearDupPolicy& policy,
                          CurationReport* report = nullptr);

struct BalanceConfig {
  std::map<StrategyId, std::uint64_t> caps;  // explicit per-strategy caps
  std::set<StrategyId> exclusions;
  std::uint64_t seed = 0;
};

/// 2 x median of the nonzero per-strategy counts (0 when there are none).
std::uint64_t default_balance_cap(const std::map<StrategyId, std::uint64_t>& counts);

/// Drops excluded strategies and down-samples the rest to their caps with a
/// seeded uniform sample; surviving pairs keep their input order.
std::vector<QaPair> balance(const std::vector<QaPair>& pairs, const BalanceConfig& cfg,
                            CurationReport* report = nullptr);

enum class Side { train, test };

std::string_view to_string(Side side) noexcept;

/// Cardinality bucket used for stratification: "0", "1", "2" or "3+".
std::string cardinality_bucket(std::size_t answer_count);

struct Dataset {
  std::vector<QaPair> pairs;
  std::map<std::string, Side> split;
  std::uint64_t seed = 0;
  double ratio = 0.8;

  std::vector<QaPair> side(Side s) const;

  /// {"seed","ratio","assignments":[{"id","split"},...]} in pair order.
  nlohmann::ordered_json split_json() const;
  static Dataset from_parts(std::vector<QaPair> pairs, const nlohmann::json& split_doc);
};

/// Number of training pairs for `total` items: floor(ratio * total).
std::uint64_t train_size(std::uint64_t total, double ratio);

/// Stratified by (strategy, cardinality bucket) with largest-remainder
/// allocation; throws std::invalid_argument when ratio is outside (0, 1) or
/// pair ids collide.
Dataset split_dataset(const std::vector<QaPair>& pairs, double ratio, std::uint64_t seed);

struct ExportOptions {
  InferenceMode mode = InferenceMode::question_only;
  std::uint64_t file_list_budget = 4000;
};

/// JSONL chat records. Train records end with the assistant's compact JSON
/// path array; test records omit it and carry "gold".
std::string export_training(const Dataset& dataset, Side side, const RepoSnapshot& snapshot,
                            const ExportOptions& opts = {});

/// Reads back export records (either side) into pairs (task_id is not part of
/// the export and comes back empty).
std::vector<QaPair> import_export(std::string_view jsonl);

std::string pairs_to_jsonl(const std::vector<QaPair>& pairs);
std::vector<QaPair> pairs_from_jsonl(std::string_view jsonl);

struct CurationConfig {
  ValidationPolicy validation;
  NearDupPolicy near_dup;
  BalanceConfig balance;
};

struct CurationResult {
  std::vector<QaPair> pairs;
  CurationReport report;
};

/// Joins completions to tasks, extracts items, validates, dedups and balances.
CurationResult curate(const std::vector<GenerationTask>& tasks, const std::vector<RawCompletion>& completions,
                      const RepoSnapshot& snapshot, const CurationConfig& cfg);

}  // namespace repoqa
