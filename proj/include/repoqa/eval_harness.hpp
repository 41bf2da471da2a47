#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repoqa/bm25.hpp"
#include "repoqa/generation_client.hpp"
#include "repoqa/qa_curation.hpp"
#include "repoqa/repo_snapshot.hpp"
#include "repoqa/strategy_engine.hpp"
#include "repoqa/types.hpp"

namespace repoqa {

/// Scoring against an empty gold set.
class ScoringError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Predicted sets may hold duplicates and any order; both are ignored.
int score_exact_match(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);
int score_recall(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);
/// |predicted ∩ gold| / |gold|.
double score_micro(const std::vector<std::string>& predicted, const std::vector<std::string>& gold);

struct PredictionRecord {
  std::string pair_id;
  std::string raw_text;
  std::vector<std::string> predicted_paths;  // sorted, unique
  Validity parse_validity = Validity::invalid;
  std::uint64_t member_count = 0;

  /// {"pair_id","raw_text","predicted_paths","parse_validity","member_count"}
  nlohmann::ordered_json to_json() const;
  static PredictionRecord from_json(const nlohmann::json& doc);
};

struct Metrics {
  std::uint64_t question_count = 0;
  double em = 0.0;
  double recall = 0.0;
  double micro_avg_recall = 0.0;

  nlohmann::ordered_json to_json() const;
  static Metrics from_json(const nlohmann::json& doc);
};

struct EvalReport {
  std::uint64_t question_count = 0;
  double em = 0.0;
  double recall = 0.0;
  double micro_avg_recall = 0.0;
  double validity_rate = 0.0;
  std::map<std::string, Metrics> by_strategy;
  std::map<std::string, Metrics> by_cardinality;

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& doc);
};

/// Scores every record against its gold set. Throws std::runtime_error naming
/// the pair when a record has no gold or appears twice. Independent of record order.
EvalReport aggregate(const std::vector<PredictionRecord>& records,
                     const std::map<std::string, std::vector<std::string>>& gold_map,
                     const std::map<std::string, StrategyId>& strategy_map,
                     Execution exec = Execution::parallel);

/// Convenience: gold and strategy maps from curated pairs.
EvalReport aggregate(const std::vector<PredictionRecord>& records, const std::vector<QaPair>& gold_pairs,
                     Execution exec = Execution::parallel);

// ---- predictors -------------------------------------------------------------------

/// Produces the raw completion text for one test pair. Throwing marks that
/// record invalid (AuthError is rethrown).
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual std::string predict(const QaPair& pair) = 0;
  virtual std::string id() const = 0;
  virtual std::uint32_t max_concurrency() const { return 1; }
};

/// Answers with the gold set.
class OraclePredictor final : public Predictor {
 public:
  std::string predict(const QaPair& pair) override;
  std::string id() const override { return "oracle"; }
};

/// Always answers "[]".
class EmptyPredictor final : public Predictor {
 public:
  std::string predict(const QaPair&) override { return "[]"; }
  std::string id() const override { return "empty"; }
};

/// Top-k BM25 files for the question.
class Bm25Predictor final : public Predictor {
 public:
  Bm25Predictor(const Bm25Index& index, std::size_t k) : index_(index), k_(k) {}
  std::string predict(const QaPair& pair) override;
  std::string id() const override { return "bm25"; }

 private:
  const Bm25Index& index_;
  std::size_t k_;
};

/// Replays raw_text from an external predictions JSONL ({"pair_id","raw_text"}).
class FilePredictor final : public Predictor {
 public:
  explicit FilePredictor(std::string_view jsonl);
  std::string predict(const QaPair& pair) override;
  std::string id() const override { return "file"; }
  std::size_t size() const noexcept { return raw_.size(); }

 private:
  std::map<std::string, std::string> raw_;
};

struct ChatPredictorConfig {
  std::string model_id;
  InferenceMode mode = InferenceMode::question_only;
  std::uint64_t file_list_budget = 4000;
  double temperature = 0.0;
  std::uint32_t max_output_tokens = 300;
  std::uint32_t max_concurrency = 4;
  RetryPolicy retry;
};

/// Sends the unified inference prompt to a chat backend.
class ChatPredictor final : public Predictor {
 public:
  ChatPredictor(ChatBackend& backend, const RepoSnapshot& snapshot, ChatPredictorConfig cfg,
                Sleeper sleeper = thread_sleeper());
  std::string predict(const QaPair& pair) override;
  std::string id() const override { return "chat:" + backend_.id(); }
  std::uint32_t max_concurrency() const override;

 private:
  ChatBackend& backend_;
  const RepoSnapshot& snapshot_;
  ChatPredictorConfig cfg_;
  Sleeper sleeper_;
};

/// Parses raw text into a record: paths normalized against the snapshot,
/// non-members kept in their cleaned form and left out of member_count.
PredictionRecord make_record(std::string pair_id, std::string raw_text, const RepoSnapshot& snapshot);

/// Runs the predictor over every pair, keeping pair order.
std::vector<PredictionRecord> run_predictor(const std::vector<QaPair>& pairs, Predictor& predictor,
                                            const RepoSnapshot& snapshot);

std::string records_to_jsonl(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> records_from_jsonl(std::string_view jsonl);

// ---- reports ----------------------------------------------------------------------

struct ReportRow {
  std::string label;  // repo or configuration name
  EvalReport report;
};

/// Table with columns Repo/Config, EM, Recall, Micro-Recall (four decimals),
/// followed by per-strategy and per-cardinality breakdowns of the first row.
std::string render_markdown(const std::vector<ReportRow>& rows);

}  // namespace repoqa
