#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "repoqa/code_summarizer.hpp"
#include "repoqa/eval_harness.hpp"
#include "repoqa/generation_client.hpp"
#include "repoqa/qa_curation.hpp"
#include "repoqa/repo_snapshot.hpp"
#include "repoqa/strategy_engine.hpp"

namespace repoqa {

struct BackendSettings {
  std::string kind = "scripted";  // scripted | http
  std::string endpoint;
  std::string model = "scripted";
  std::string api_key_env = "REPOQA_API_KEY";
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;
  std::uint32_t max_concurrency = 4;
  std::uint32_t max_attempts = 5;
  std::uint64_t base_delay_ms = 1000;
  std::uint64_t timeout_s = 120;
};

struct EvalSettings {
  InferenceMode mode = InferenceMode::question_only;
  std::string predictor = "oracle";  // oracle | empty | bm25 | chat | file
  std::uint32_t k = 3;
  std::filesystem::path predictions_file;
  std::string label;
  std::string model;  // chat predictor; falls back to backend.model
  std::uint64_t file_list_budget = 4000;
};

struct PipelineConfig {
  std::filesystem::path repo_root;
  ScanConfig scan;
  GenConfig gen;
  SummaryOptions summary;
  std::vector<StrategyId> strategies{StrategyId::S2, StrategyId::S3, StrategyId::S4, StrategyId::S5, StrategyId::S6};
  BackendSettings backend;
  CurationConfig curation;
  double split_ratio = 0.8;
  std::uint64_t split_seed = 0;
  EvalSettings eval;
  std::filesystem::path workspace = "workspace";

  /// Sectioned key/value file ([repo], [scan], [generation], [backend],
  /// [curation], [split], [eval], [workspace]). Relative paths resolve
  /// against the file's directory. Unknown keys are a ConfigError.
  static PipelineConfig load(const std::filesystem::path& file);
  static PipelineConfig parse(std::istream& in, const std::filesystem::path& base_dir);

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

/// A stage ran before the stage that produces its input.
class MissingArtifact : public std::runtime_error {
 public:
  MissingArtifact(const std::filesystem::path& file, const std::string& producer);
};

/// The generation backend produced nothing usable.
class BackendFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fixed on-disk layout under the workspace directory.
struct Workspace {
  std::filesystem::path dir;

  std::filesystem::path snapshot() const { return dir / "snapshot.json"; }
  std::filesystem::path summaries() const { return dir / "summaries"; }
  std::filesystem::path l1_text() const { return summaries() / "l1.txt"; }
  std::filesystem::path l1() const { return summaries() / "l1.json"; }
  std::filesystem::path l2() const { return summaries() / "l2.json"; }
  std::filesystem::path l3() const { return summaries() / "l3.json"; }
  std::filesystem::path tasks() const { return dir / "tasks" / "tasks.jsonl"; }
  std::filesystem::path completions() const { return dir / "completions" / "completions.jsonl"; }
  std::filesystem::path dataset() const { return dir / "dataset.jsonl"; }
  std::filesystem::path curation() const { return dir / "curation.json"; }
  std::filesystem::path split() const { return dir / "split.json"; }
  std::filesystem::path train_export() const { return dir / "export" / "train.jsonl"; }
  std::filesystem::path test_export() const { return dir / "export" / "test.jsonl"; }
  std::filesystem::path predictions(const std::string& name) const { return dir / "predictions" / (name + ".jsonl"); }
  std::filesystem::path reports() const { return dir / "reports"; }
  std::filesystem::path report(const std::string& name) const { return reports() / (name + ".json"); }
  std::filesystem::path markdown_report() const { return reports() / "report.md"; }
};

std::string read_text(const std::filesystem::path& file);
void write_text(const std::filesystem::path& file, std::string_view text);

/// Backend described by the settings. http needs the API key in the
/// configured environment variable.
std::unique_ptr<ChatBackend> make_backend(const BackendSettings& settings);

// Each stage reads its predecessors' artifacts, writes its own and returns a
// one-line summary. Warnings go to `log`.
std::string run_scan(const PipelineConfig& cfg, std::ostream& log);
std::string run_summarize(const PipelineConfig& cfg, std::ostream& log, Execution exec = Execution::parallel);
/// `backend` overrides the configured one when non-null.
std::string run_gen(const PipelineConfig& cfg, std::ostream& log, ChatBackend* backend = nullptr,
                    const Sleeper& sleeper = thread_sleeper());
std::string run_curate(const PipelineConfig& cfg, std::ostream& log);
std::string run_split(const PipelineConfig& cfg, std::ostream& log);
std::string run_export(const PipelineConfig& cfg, std::ostream& log);
std::string run_eval(const PipelineConfig& cfg, std::ostream& log, ChatBackend* backend = nullptr);
std::string run_report(const PipelineConfig& cfg, std::ostream& log);

}  // namespace repoqa
