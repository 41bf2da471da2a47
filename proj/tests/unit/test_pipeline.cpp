#include <gtest/gtest.h>

#include <sstream>

#include "repoqa/pipeline.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;
using nlohmann::json;

namespace {

PipelineConfig parse_text(const std::string& text, const std::filesystem::path& base) {
  std::istringstream in(text);
  return PipelineConfig::parse(in, base);
}

std::size_t line_count(const std::filesystem::path& file) {
  auto text = read_text(file);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST(Config, ParsesAllSections) {
  TempDir dir("cfg");
  dir.write("repo/a.py", "");
  auto cfg = parse_text(R"(
[repo]
root = "repo"

[scan]
extensions = [".py", "pyi"]
ignored_dirs = ["build"]

[generation]
strategies = ["S1", "S6"]
num_questions = 12
s6_max_files = 4
context_budget = 3000
l2_method_names = true

[backend]
kind = "http"
endpoint = "http://127.0.0.1:9/v1/chat/completions"
model = "m"
max_concurrency = 2

[curation]
path_policy = "repair"
near_dup_threshold = 0.9
exclusions = ["S1"]
seed = 5

[curation.caps]
S6 = 40

[split]
ratio = 0.75
seed = 3

[eval]
mode = "with_file_list"
predictor = "bm25"
k = 5

[workspace]
dir = "ws"
)",
                        dir.path());
  EXPECT_EQ(cfg.repo_root, dir.path() / "repo");
  EXPECT_EQ(cfg.scan.extensions, (std::set<std::string>{".py", ".pyi"}));
  EXPECT_EQ(cfg.scan.ignored_dirs, std::set<std::string>{"build"});
  EXPECT_EQ(cfg.strategies, (std::vector<StrategyId>{StrategyId::S1, StrategyId::S6}));
  EXPECT_EQ(cfg.gen.num_questions, 12u);
  EXPECT_EQ(cfg.gen.s6_max_files, 4u);
  EXPECT_EQ(cfg.gen.context_budget, 3000u);
  EXPECT_TRUE(cfg.summary.l2_method_names);
  EXPECT_EQ(cfg.backend.kind, "http");
  EXPECT_EQ(cfg.backend.max_concurrency, 2u);
  EXPECT_EQ(cfg.curation.validation.paths, PathPolicy::repair);
  EXPECT_EQ(cfg.curation.near_dup.threshold, 0.9);
  EXPECT_EQ(cfg.curation.balance.exclusions, std::set<StrategyId>{StrategyId::S1});
  EXPECT_EQ(cfg.curation.balance.caps.at(StrategyId::S6), 40u);
  EXPECT_EQ(cfg.curation.balance.seed, 5u);
  EXPECT_EQ(cfg.split_ratio, 0.75);
  EXPECT_EQ(cfg.split_seed, 3u);
  EXPECT_EQ(cfg.eval.mode, InferenceMode::with_file_list);
  EXPECT_EQ(cfg.eval.predictor, "bm25");
  EXPECT_EQ(cfg.eval.k, 5u);
  EXPECT_EQ(cfg.workspace, dir.path() / "ws");
}

TEST(Config, Defaults) {
  TempDir dir("cfg-def");
  auto cfg = parse_text("[repo]\nroot = \".\"\n", dir.path());
  EXPECT_EQ(cfg.strategies.size(), 5u);
  EXPECT_EQ(cfg.split_ratio, 0.8);
  EXPECT_EQ(cfg.gen.max_qa_per_file, 5u);
  EXPECT_EQ(cfg.gen.num_questions, 20u);
  EXPECT_EQ(cfg.gen.q_per_batch, 8u);
  EXPECT_EQ(cfg.backend.kind, "scripted");
  EXPECT_EQ(cfg.curation.validation.paths, PathPolicy::strict);
  EXPECT_EQ(cfg.curation.near_dup.threshold, 0.85);
  EXPECT_EQ(cfg.eval.mode, InferenceMode::question_only);
}

TEST(Config, Errors) {
  TempDir dir("cfg-err");
  EXPECT_THROW(parse_text("[repo]\nroot = \".\"\n[generation]\nnum_question = 3\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[nope]\nx = 1\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[repo]\nroot = \"missing\"\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[repo]\nroot = \".\"\n[split]\nratio = 1.5\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[repo]\nroot = \".\"\n[generation]\nstrategies = [\"S9\"]\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[repo]\nroot = \".\"\n[backend]\nkind = \"http\"\n", dir.path()), ConfigError);
  EXPECT_THROW(parse_text("[repo]\nroot = \".\"\n[generation]\nnum_questions = \"many\"\n", dir.path()), ConfigError);
  EXPECT_THROW(PipelineConfig::load(dir.path() / "absent.toml"), ConfigError);
}

TEST(Backend, HttpNeedsKey) {
  BackendSettings s;
  s.kind = "http";
  s.endpoint = "http://127.0.0.1:9/v1/chat/completions";
  s.api_key_env = "REPOQA_TEST_KEY_THAT_IS_UNSET";
  EXPECT_THROW(make_backend(s), ConfigError);
  EXPECT_EQ(make_backend(BackendSettings{})->id(), "scripted");
}

TEST(Pipeline, MissingArtifactNamesProducer) {
  TempDir ws("ws-missing");
  PipelineConfig cfg;
  cfg.repo_root = fixture_repo();
  cfg.workspace = ws.path();
  std::ostringstream log;
  try {
    run_summarize(cfg, log);
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("repoqa scan"), std::string::npos) << e.what();
  }
  run_scan(cfg, log);
  try {
    run_curate(cfg, log);
    FAIL() << "expected MissingArtifact";
  } catch (const MissingArtifact& e) {
    EXPECT_NE(std::string(e.what()).find("repoqa gen"), std::string::npos) << e.what();
  }
  EXPECT_THROW(run_split(cfg, log), MissingArtifact);
  EXPECT_THROW(run_eval(cfg, log), MissingArtifact);
}

TEST(Pipeline, OfflineEndToEndOnFixture) {
  TempDir ws("ws-e2e");
  PipelineConfig cfg;
  cfg.repo_root = fixture_repo();
  cfg.workspace = ws.path();
  cfg.strategies = {StrategyId::S1, StrategyId::S2, StrategyId::S3, StrategyId::S4, StrategyId::S5, StrategyId::S6};
  std::ostringstream log;
  Workspace w{ws.path()};
  run_scan(cfg, log);
  EXPECT_TRUE(std::filesystem::exists(w.snapshot()));
  run_summarize(cfg, log);
  for (const auto& f : {w.l1(), w.l1_text(), w.l2(), w.l3()}) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  run_gen(cfg, log, nullptr, [](auto) {});
  EXPECT_EQ(line_count(w.tasks()), line_count(w.completions()));
  auto curated = run_curate(cfg, log);
  EXPECT_NE(curated.find("balance removed"), std::string::npos);
  run_split(cfg, log);
  run_export(cfg, log);
  const auto train = line_count(w.train_export()), test = line_count(w.test_export());
  EXPECT_EQ(train + test, line_count(w.dataset()));
  EXPECT_EQ(train, train_size(train + test, 0.8));
  EXPECT_GE(train + test, 40u);

  run_eval(cfg, log);
  auto oracle = EvalReport::from_json(json::parse(read_text(w.report("oracle"))));
  EXPECT_EQ(oracle.question_count, test);
  EXPECT_EQ(oracle.em, 1.0);
  EXPECT_EQ(oracle.micro_avg_recall, 1.0);

  cfg.eval.predictor = "empty";
  run_eval(cfg, log);
  auto empty = EvalReport::from_json(json::parse(read_text(w.report("empty"))));
  EXPECT_EQ(empty.em, 0.0);
  EXPECT_EQ(empty.recall, 0.0);

  // The predictions file written by the oracle run doubles as external input.
  cfg.eval.predictor = "file";
  cfg.eval.predictions_file = w.predictions("oracle");
  cfg.eval.label = "replayed";
  run_eval(cfg, log);
  EXPECT_EQ(EvalReport::from_json(json::parse(read_text(w.report("replayed")))).em, 1.0);

  run_report(cfg, log);
  auto md = read_text(w.markdown_report());
  EXPECT_NE(md.find("| oracle | 1.0000 | 1.0000 | 1.0000 |"), std::string::npos) << md;
  EXPECT_NE(md.find("| empty | 0.0000 | 0.0000 | 0.0000 |"), std::string::npos) << md;

  // Re-running with the same inputs reproduces byte-identical exports.
  const auto train_bytes = read_text(w.train_export());
  run_gen(cfg, log, nullptr, [](auto) {});
  run_curate(cfg, log);
  run_split(cfg, log);
  run_export(cfg, log);
  EXPECT_EQ(read_text(w.train_export()), train_bytes);
}

TEST(Pipeline, AllFailedGenerationIsBackendFailure) {
  TempDir ws("ws-fail");
  PipelineConfig cfg;
  cfg.repo_root = fixture_repo();
  cfg.workspace = ws.path();
  cfg.strategies = {StrategyId::S2};
  cfg.backend.max_attempts = 2;
  std::ostringstream log;
  run_scan(cfg, log);
  run_summarize(cfg, log, Execution::serial);
  FunctionBackend down([](const ChatRequest&, const GenerationTask*) { return BackendReply{503, "", 0, "down"}; });
  EXPECT_THROW(run_gen(cfg, log, &down, [](auto) {}), BackendFailure);
}
