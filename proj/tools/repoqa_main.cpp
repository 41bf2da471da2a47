// repoqa: repository -> question/file-path dataset, export and evaluation.

#include <CLI11.hpp>

#include <iostream>

#include "repoqa/pipeline.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kMissing = 2, kBackend = 3 };

}  // namespace

int main(int argc, char** argv) {
  using namespace repoqa;

  CLI::App app{"repoqa: build question -> file-path datasets from a repository and evaluate path predictors"};
  app.require_subcommand(1, 1);

  std::string config_file;
  std::string workspace;
  std::string repo;
  app.add_option("-c,--config", config_file, "Pipeline config file (sectioned key = value)");
  app.add_option("-w,--workspace", workspace, "Workspace directory (overrides [workspace] dir)");
  app.add_option("-r,--repo", repo, "Repository root (overrides [repo] root)");

  auto* scan = app.add_subcommand("scan", "Walk the repository and write snapshot.json");
  auto* summarize = app.add_subcommand("summarize", "Write L1/L2/L3 summaries under summaries/");
  bool serial = false;
  summarize->add_flag("--serial", serial, "Use the serial reference path");

  auto* gen = app.add_subcommand("gen", "Build generation tasks and collect completions");
  std::vector<std::string> strategies;
  std::string backend_kind;
  std::uint64_t gen_seed = 0;
  gen->add_option("-s,--strategy", strategies, "Strategy to run (S1..S6); repeatable; default S2..S6");
  gen->add_option("--backend", backend_kind, "scripted or http")->check(CLI::IsMember({"scripted", "http"}));
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "Generation seed");

  auto* curate_cmd = app.add_subcommand("curate", "Validate, dedup and balance completions into dataset.jsonl");
  std::vector<std::string> exclusions;
  std::string path_policy;
  curate_cmd->add_option("--exclude", exclusions, "Strategy to drop; repeatable");
  curate_cmd->add_option("--path-policy", path_policy, "strict or repair")->check(CLI::IsMember({"strict", "repair"}));

  auto* split_cmd = app.add_subcommand("split", "Stratified train/test split into split.json");
  double ratio = 0.0;
  std::uint64_t split_seed = 0;
  auto* ratio_opt = split_cmd->add_option("--ratio", ratio, "Training fraction");
  auto* split_seed_opt = split_cmd->add_option("--seed", split_seed, "Split seed");

  auto* export_cmd = app.add_subcommand("export", "Write export/train.jsonl and export/test.jsonl");
  std::string mode;
  export_cmd->add_option("--mode", mode, "question_only or with_file_list")
      ->check(CLI::IsMember({"question_only", "with_file_list"}));

  auto* eval = app.add_subcommand("eval", "Run a predictor over the test export and score it");
  std::string predictor;
  std::uint32_t k = 0;
  std::string predictions;
  std::string label;
  eval->add_option("-p,--predictor", predictor, "oracle, empty, bm25, chat or file")
      ->check(CLI::IsMember({"oracle", "empty", "bm25", "chat", "file"}));
  eval->add_option("-k", k, "Top-k for the bm25 predictor");
  eval->add_option("--predictions", predictions, "External predictions JSONL for the file predictor");
  eval->add_option("--label", label, "Name for the prediction and report files");
  eval->add_option("--mode", mode, "question_only or with_file_list")
      ->check(CLI::IsMember({"question_only", "with_file_list"}));

  auto* report = app.add_subcommand("report", "Render reports/report.md from reports/*.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    PipelineConfig cfg = config_file.empty() ? PipelineConfig{} : PipelineConfig::load(config_file);
    if (!workspace.empty()) cfg.workspace = workspace;
    if (!repo.empty()) cfg.repo_root = repo;
    if (!strategies.empty()) {
      cfg.strategies.clear();
      for (const auto& s : strategies) {
        auto id = parse_strategy(s);
        if (!id) throw ConfigError("unknown strategy: " + s);
        cfg.strategies.push_back(*id);
      }
    }
    if (!backend_kind.empty()) cfg.backend.kind = backend_kind;
    if (*gen_seed_opt) cfg.gen.seed = gen_seed;
    if (!exclusions.empty()) {
      cfg.curation.balance.exclusions.clear();
      for (const auto& s : exclusions) {
        auto id = parse_strategy(s);
        if (!id) throw ConfigError("unknown strategy: " + s);
        cfg.curation.balance.exclusions.insert(*id);
      }
    }
    if (!path_policy.empty()) cfg.curation.validation.paths = path_policy == "repair" ? PathPolicy::repair : PathPolicy::strict;
    if (*ratio_opt) cfg.split_ratio = ratio;
    if (*split_seed_opt) cfg.split_seed = split_seed;
    if (!mode.empty()) cfg.eval.mode = parse_inference_mode(mode);
    if (!predictor.empty()) cfg.eval.predictor = predictor;
    if (k > 0) cfg.eval.k = k;
    if (!predictions.empty()) cfg.eval.predictions_file = predictions;
    if (!label.empty()) cfg.eval.label = label;
    cfg.validate();

    std::string line;
    if (*scan) line = run_scan(cfg, std::cerr);
    else if (*summarize) line = run_summarize(cfg, std::cerr, serial ? Execution::serial : Execution::parallel);
    else if (*gen) line = run_gen(cfg, std::cerr);
    else if (*curate_cmd) line = run_curate(cfg, std::cerr);
    else if (*split_cmd) line = run_split(cfg, std::cerr);
    else if (*export_cmd) line = run_export(cfg, std::cerr);
    else if (*eval) line = run_eval(cfg, std::cerr);
    else if (*report) line = run_report(cfg, std::cerr);
    std::cout << line << "\n";
    return kOk;
  } catch (const MissingArtifact& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissing;
  } catch (const AuthError& e) {
    std::cerr << "error: backend rejected the credentials: " << e.what() << "\n";
    return kBackend;
  } catch (const BackendFailure& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
