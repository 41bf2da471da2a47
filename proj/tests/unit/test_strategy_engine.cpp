#include <gtest/gtest.h>

#include <random>
#include <set>

#include "repoqa/strategy_engine.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;

namespace {

struct Fixture {
  RepoSnapshot snap;
  RepoContents contents;
  StructureTree l1;
  EntityIndex l2;
  FineSummary l3;

  explicit Fixture(const std::map<std::string, std::string>& files)
      : snap(make_snapshot(files)), contents(RepoContents::from_map(snap, files)) {
    l1 = summarize_l1(snap);
    l2 = summarize_l2(snap, contents, default_parser_factory());
    l3 = summarize_l3(snap, contents, default_parser_factory());
  }
  StrategyInputs inputs() const { return {&snap, &contents, &l1, &l2, &l3}; }
};

std::map<std::string, std::string> small_repo(int n) {
  std::map<std::string, std::string> files;
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "pkg/m%02d.py", i);
    files[name] = "def f" + std::to_string(i) + "():\n    \"\"\"Doc " + std::to_string(i) + ".\"\"\"\n    return " +
                  std::to_string(i) + "\n";
  }
  return files;
}

}  // namespace

TEST(PathBounds, PerStrategy) {
  EXPECT_EQ(path_bounds(StrategyId::S1).min_paths, 1u);
  EXPECT_EQ(path_bounds(StrategyId::S1).max_paths, 3u);
  EXPECT_EQ(path_bounds(StrategyId::S4).max_paths, 4u);
  EXPECT_EQ(path_bounds(StrategyId::S6).min_paths, 1u);
  for (auto s : {StrategyId::S2, StrategyId::S3, StrategyId::S5}) {
    EXPECT_EQ(path_bounds(s).min_paths, 0u);
    EXPECT_EQ(path_bounds(s).max_paths, 4u);
  }
}

TEST(GenConfigValidate, Ranges) {
  GenConfig ok;
  EXPECT_NO_THROW(ok.validate());
  GenConfig bad = ok;
  bad.num_questions = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.s6_min_files = 6;
  bad.s6_max_files = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.s6_max_files = 65;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(BuildTasks, S2IsOneTask) {
  Fixture fx(small_repo(7));
  auto tasks = build_tasks(fx.inputs(), StrategyId::S2, GenConfig{});
  ASSERT_EQ(tasks.size(), 1u);
  EXPECT_EQ(tasks[0].context, fx.l1.rendered);
  EXPECT_EQ(tasks[0].manifest, fx.snap.paths());
  EXPECT_EQ(tasks[0].max_questions, 20u);
}

TEST(BuildTasks, S6TwelveFilesCapFour) {
  Fixture fx(small_repo(12));
  GenConfig cfg;
  cfg.s6_max_files = 4;
  auto tasks = build_tasks(fx.inputs(), StrategyId::S6, cfg);
  ASSERT_EQ(tasks.size(), 3u);
  std::vector<RepoPath> all;
  for (const auto& t : tasks) {
    EXPECT_EQ(t.manifest.size(), 4u);
    all.insert(all.end(), t.manifest.begin(), t.manifest.end());
  }
  std::sort(all.begin(), all.end());
  EXPECT_TRUE(std::adjacent_find(all.begin(), all.end()) == all.end());
  EXPECT_EQ(all, fx.snap.paths());
}

TEST(BuildTasks, S6ShortTailBorrows) {
  Fixture fx(small_repo(13));
  GenConfig cfg;
  cfg.s6_max_files = 4;
  auto tasks = build_tasks(fx.inputs(), StrategyId::S6, cfg);
  ASSERT_EQ(tasks.size(), 4u);
  std::vector<std::size_t> sizes;
  for (const auto& t : tasks) sizes.push_back(t.manifest.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 3, 2}));
}

TEST(BuildTasks, S1OnePerUnchunkedFile) {
  std::map<std::string, std::string> files;
  for (int i = 0; i < 94; ++i) files["src/flask/f" + std::to_string(i) + ".py"] = "x = " + std::to_string(i) + "\n";
  Fixture fx(files);
  auto tasks = build_tasks(fx.inputs(), StrategyId::S1, GenConfig{});
  ASSERT_EQ(tasks.size(), 94u);
  for (const auto& t : tasks) {
    EXPECT_EQ(t.manifest.size(), 94u);
    ASSERT_EQ(t.focus.size(), 1u);
    EXPECT_NE(t.context.find("Current file: " + t.focus[0].str()), std::string::npos);
    EXPECT_EQ(t.min_paths, 1u);
    EXPECT_EQ(t.max_paths, 3u);
  }
}

TEST(BuildTasks, S1ChunksLargeFiles) {
  std::string big;
  for (int i = 0; i < 400; ++i) big += "value_" + std::to_string(i) + " = " + std::to_string(i * i) + "  # padding text\n";
  Fixture fx({{"big.py", big}, {"small.py", "x = 1\n"}});
  GenConfig cfg;
  cfg.context_budget = 1000;
  auto tasks = build_tasks(fx.inputs(), StrategyId::S1, cfg);
  ASSERT_GT(tasks.size(), 2u);
  std::size_t big_parts = 0;
  for (const auto& t : tasks) {
    EXPECT_LE(estimate_tokens(t.context), cfg.context_budget);
    if (t.focus[0].str() == "big.py") ++big_parts;
  }
  EXPECT_EQ(big_parts, tasks.size() - 1);
  EXPECT_NE(tasks[0].context.find("Part 1 of "), std::string::npos);
}

TEST(BuildTasks, S3WindowsFollowDirectories) {
  std::map<std::string, std::string> files;
  for (const char* dir : {"alpha", "beta", "gamma"}) {
    for (int i = 0; i < 6; ++i) {
      files[std::string(dir) + "/mod" + std::to_string(i) + ".py"] =
          "class Widget" + std::to_string(i) + "(Base):\n    pass\n\ndef helper_function_" + std::to_string(i) + "():\n    pass\n";
    }
  }
  Fixture fx(files);
  GenConfig cfg;
  cfg.context_budget = 200;
  auto tasks = build_tasks(fx.inputs(), StrategyId::S3, cfg);
  ASSERT_GE(tasks.size(), 2u);
  std::vector<RepoPath> all;
  std::map<std::string, std::set<std::string>> windows_of_dir;
  for (const auto& t : tasks) {
    EXPECT_LE(estimate_tokens(t.context), cfg.context_budget);
    for (const auto& p : t.manifest) {
      windows_of_dir[std::string(p.parent())].insert(t.id);
      EXPECT_NE(t.context.find(std::string(p.filename())), std::string::npos);
    }
    all.insert(all.end(), t.manifest.begin(), t.manifest.end());
  }
  for (const auto& [dir, ids] : windows_of_dir) EXPECT_EQ(ids.size(), 1u) << dir;
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, fx.snap.paths());
}

TEST(BuildTasks, S4ManifestListsSplitFileOnce) {
  std::string many;
  for (int i = 0; i < 80; ++i) {
    many += "def function_number_" + std::to_string(i) + "(argument_one, argument_two):\n    \"\"\"Documented " +
            std::to_string(i) + ".\"\"\"\n\n";
  }
  Fixture fx({{"a.py", many}, {"b.py", "def g():\n    pass\n"}});
  GenConfig cfg;
  cfg.context_budget = 400;
  auto tasks = build_tasks(fx.inputs(), StrategyId::S4, cfg);
  ASSERT_GT(tasks.size(), 1u);
  for (const auto& t : tasks) {
    EXPECT_LE(estimate_tokens(t.context), cfg.context_budget);
    EXPECT_EQ(t.context.rfind("MANIFEST:\n", 0), 0u);
    EXPECT_TRUE(std::is_sorted(t.manifest.begin(), t.manifest.end()));
    EXPECT_TRUE(std::adjacent_find(t.manifest.begin(), t.manifest.end()) == t.manifest.end());
    EXPECT_EQ(t.min_paths, 1u);
    EXPECT_EQ(t.max_paths, 4u);
  }
  EXPECT_NE(tasks[0].context.find("FILE: a.py (part 1)"), std::string::npos);
}

TEST(BuildTasks, S5OnePerFile) {
  Fixture fx(small_repo(5));
  auto tasks = build_tasks(fx.inputs(), StrategyId::S5, GenConfig{});
  ASSERT_EQ(tasks.size(), 5u);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(tasks[i].manifest, fx.snap.paths());
    EXPECT_EQ(tasks[i].focus, std::vector<RepoPath>{fx.snap.files()[i].path});
    EXPECT_NE(tasks[i].context.find(fx.l1.rendered), std::string::npos);
    EXPECT_NE(tasks[i].context.find("FILE: " + fx.snap.files()[i].path.str()), std::string::npos);
  }
}

TEST(BuildTasks, MissingSummaryIsConfigError) {
  Fixture fx(small_repo(2));
  StrategyInputs in{&fx.snap, &fx.contents, nullptr, nullptr, nullptr};
  EXPECT_THROW(build_tasks(in, StrategyId::S2, GenConfig{}), ConfigError);
  EXPECT_THROW(build_tasks(in, StrategyId::S3, GenConfig{}), ConfigError);
  EXPECT_THROW(build_tasks(in, StrategyId::S4, GenConfig{}), ConfigError);
  EXPECT_THROW(build_tasks(in, StrategyId::S5, GenConfig{}), ConfigError);
  StrategyInputs no_contents{&fx.snap, nullptr, &fx.l1, &fx.l2, &fx.l3};
  EXPECT_THROW(build_tasks(no_contents, StrategyId::S1, GenConfig{}), ConfigError);
  EXPECT_THROW(build_tasks(no_contents, StrategyId::S6, GenConfig{}), ConfigError);
}

TEST(BuildTasks, BudgetHoldsOnRandomRepos) {
  std::mt19937_64 rng(77);
  for (int round = 0; round < 20; ++round) {
    std::map<std::string, std::string> files;
    const auto n = 5 + uniform_below(rng, 40);
    for (std::uint64_t i = 0; i < n; ++i) {
      std::string body;
      const auto defs = uniform_below(rng, 30);
      for (std::uint64_t d = 0; d < defs; ++d) body += "def fn_" + std::to_string(d) + "(x):\n    \"\"\"Doc.\"\"\"\n    return x\n";
      files["d" + std::to_string(uniform_below(rng, 4)) + "/f" + std::to_string(i) + ".py"] = body;
    }
    Fixture fx(files);
    GenConfig cfg;
    cfg.context_budget = 256 + uniform_below(rng, 1500);
    for (auto s : kAllStrategies) {
      for (const auto& t : build_tasks(fx.inputs(), s, cfg)) {
        if (!t.truncated) EXPECT_LE(estimate_tokens(t.context), cfg.context_budget) << t.id;
        EXPECT_TRUE(std::is_sorted(t.manifest.begin(), t.manifest.end()));
        EXPECT_TRUE(std::adjacent_find(t.manifest.begin(), t.manifest.end()) == t.manifest.end());
        for (const auto& p : t.manifest) EXPECT_TRUE(fx.snap.contains(p.str()));
      }
    }
  }
}

TEST(BuildTasks, TaskJsonRoundTrip) {
  Fixture fx(small_repo(3));
  for (const auto& t : build_tasks(fx.inputs(), StrategyId::S6, GenConfig{})) {
    auto j = t.to_json();
    EXPECT_TRUE(j.contains("id") && j.contains("context") && j.contains("manifest") && j.contains("min_paths") &&
                j.contains("max_paths") && j.contains("max_questions") && j.contains("strategy"));
    auto back = GenerationTask::from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.to_json().dump(), j.dump());
  }
}

TEST(RenderPrompt, S1PlaceholderAndDeterminism) {
  Fixture fx(small_repo(2));
  GenConfig cfg;
  auto task = build_tasks(fx.inputs(), StrategyId::S1, cfg).at(0);
  auto a = render_prompt(task, cfg);
  auto b = render_prompt(task, cfg);
  EXPECT_EQ(a.user, b.user);
  EXPECT_EQ(a.system, b.system);
  EXPECT_NE(a.user.find("Generate up to 5 realistic, high-quality developer questions"), std::string::npos);
  EXPECT_NE(a.user.find("NO leading folder like \"flask/\""), std::string::npos);
  EXPECT_EQ(a.user.find("{MAX_QA_PER_FILE}"), std::string::npos);
  EXPECT_FALSE(a.system.empty());
  // The context is the payload at the end.
  ASSERT_GE(a.user.size(), task.context.size());
  EXPECT_EQ(a.user.substr(a.user.size() - task.context.size()), task.context);
}

TEST(RenderPrompt, S4LiteralRule) {
  Fixture fx(small_repo(2));
  auto task = build_tasks(fx.inputs(), StrategyId::S4, GenConfig{}).at(0);
  auto p = render_prompt(task, GenConfig{});
  EXPECT_NE(p.user.find("Sort ascending; no duplicates; 1--4 files per question."), std::string::npos);
  EXPECT_NE(p.user.find("Generate up to 8 realistic developer questions"), std::string::npos);
}

TEST(RenderPrompt, S2AndS3Templates) {
  Fixture fx(small_repo(2));
  GenConfig cfg;
  cfg.num_questions = 17;
  auto s2 = render_prompt(build_tasks(fx.inputs(), StrategyId::S2, cfg).at(0), cfg);
  EXPECT_NE(s2.user.find("Generate AT LEAST 17 realistic, diverse developer questions"), std::string::npos);
  EXPECT_NE(s2.user.find("Use ONLY the file paths that appear EXACTLY in the repository structure"), std::string::npos);
  auto s3 = render_prompt(build_tasks(fx.inputs(), StrategyId::S3, cfg).at(0), cfg);
  EXPECT_NE(s3.user.find("includes class and method names"), std::string::npos);
  for (auto s : kAllStrategies) {
    auto tasks = build_tasks(fx.inputs(), s, cfg);
    auto p = render_prompt(tasks.at(0), cfg);
    EXPECT_EQ(p.user.find("{CONTEXT}"), std::string::npos) << to_string(s);
    EXPECT_EQ(p.user.find("{num_questions}"), std::string::npos) << to_string(s);
    EXPECT_EQ(p.user.find("{q_per_batch}"), std::string::npos) << to_string(s);
  }
}

TEST(InferencePrompt, QuestionOnly) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py"});
  auto p = render_inference_prompt("Where is caching implemented?", snap, InferenceMode::question_only);
  EXPECT_EQ(p.user, "Question: Where is caching implemented?");
  for (const char* rule : {"Predict only file paths that exist in the repository.", "File paths must be exact and complete.",
                           "Do not make up or hallucinate file paths.", "Return the result as a JSON list of strings."}) {
    EXPECT_NE(p.system.find(rule), std::string::npos) << rule;
  }
  EXPECT_EQ(p.system, inference_system_text());
  EXPECT_THROW(render_inference_prompt("  ", snap, InferenceMode::question_only), std::invalid_argument);
}

TEST(InferencePrompt, WithFileList) {
  std::vector<std::string> paths;
  for (int i = 9; i >= 0; --i) paths.push_back("pkg/f" + std::to_string(i) + ".py");
  auto snap = make_snapshot(paths);
  auto p = render_inference_prompt("Q?", snap, InferenceMode::with_file_list);
  std::size_t last = 0;
  for (const auto& path : snap.paths()) {
    auto at = p.system.find(path.str());
    ASSERT_NE(at, std::string::npos) << path.str();
    EXPECT_GT(at, last);
    last = at;
  }
  auto empty = render_inference_prompt("Q?", make_snapshot(std::vector<std::string>{}), InferenceMode::with_file_list);
  EXPECT_EQ(empty.system.rfind(std::string(inference_system_text()), 0), 0u);
  EXPECT_EQ(empty.user, "Question: Q?");
}

TEST(FileListing, CollapsesUnderBudget) {
  std::vector<RepoPath> paths;
  for (int i = 0; i < 400; ++i) paths.push_back(rp("deep/pkg/sub/module_" + std::to_string(1000 + i) + ".py"));
  paths.push_back(rp("top.py"));
  std::sort(paths.begin(), paths.end());
  auto listing = render_file_listing(paths, 100);
  EXPECT_LE(estimate_tokens(listing), 100u);
  EXPECT_NE(listing.find("top.py"), std::string::npos);
  EXPECT_NE(listing.find("(400 files)"), std::string::npos);
}

TEST(InferenceMode, Parse) {
  EXPECT_EQ(parse_inference_mode("question_only"), InferenceMode::question_only);
  EXPECT_EQ(parse_inference_mode("with_file_list"), InferenceMode::with_file_list);
  EXPECT_THROW(parse_inference_mode("nope"), ConfigError);
}
