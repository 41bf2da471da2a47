#include <gtest/gtest.h>

#include <random>
#include <set>
#include <sstream>

#include "repoqa/qa_curation.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;
using nlohmann::json;

namespace {

GenerationTask task_for(StrategyId s, const std::vector<std::string>& manifest) {
  GenerationTask t;
  t.id = std::string(to_string(s)) + "-0000";
  t.strategy = s;
  t.context = "ctx";
  t.manifest = rps(manifest);
  t.focus = t.manifest;
  auto b = path_bounds(s);
  t.min_paths = b.min_paths;
  t.max_paths = b.max_paths;
  t.max_questions = 20;
  return t;
}

QaPair pair(const std::string& q, const std::vector<std::string>& paths, StrategyId s = StrategyId::S1) {
  QaPair p;
  p.question = q;
  p.answer_paths = rps(paths);
  p.strategy = s;
  p.task_id = "t";
  p.id = make_pair_id(q, p.answer_paths, s);
  return p;
}

// Reference Jaccard over space-separated lowercase words.
double brute_jaccard(const std::string& a, const std::string& b) {
  auto grams = [](const std::string& s) {
    std::vector<std::string> w;
    std::istringstream in(s);
    for (std::string t; in >> t;) w.push_back(t);
    std::set<std::string> g;
    for (std::size_t i = 0; i + 2 < w.size(); ++i) g.insert(w[i] + " " + w[i + 1] + " " + w[i + 2]);
    return g;
  };
  auto ga = grams(a), gb = grams(b);
  std::size_t inter = 0;
  for (const auto& g : ga) inter += gb.count(g);
  return static_cast<double>(inter) / static_cast<double>(ga.size() + gb.size() - inter);
}

const std::vector<std::string> kFlask{"src/flask/app.py", "src/flask/cli.py", "src/flask/config.py", "src/flask/json.py"};

}  // namespace

TEST(Validate, SortsFlaskAnswer) {
  auto snap = make_snapshot(kFlask, "flask");
  auto out = validate_item({"How is the CLI wired to the app?", {"src/flask/cli.py", "src/flask/app.py"}},
                           task_for(StrategyId::S2, kFlask), snap, {});
  ASSERT_TRUE(out.pair);
  EXPECT_EQ(out.pair->answer_paths, rps({"src/flask/app.py", "src/flask/cli.py"}));
  EXPECT_EQ(out.pair->strategy, StrategyId::S2);
  EXPECT_EQ(out.pair->id.size(), 32u);
}

TEST(Validate, UnknownPathStrictAndRepair) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py"});
  auto task = task_for(StrategyId::S1, {"a.py", "b.py"});
  auto strict = validate_item({"Q", {"ghost.py"}}, task, snap, {});
  EXPECT_FALSE(strict.pair);
  EXPECT_EQ(strict.reason, "unknown_path");
  auto strict_mixed = validate_item({"Q", {"a.py", "ghost.py"}}, task, snap, {});
  EXPECT_EQ(strict_mixed.reason, "unknown_path");
  ValidationPolicy repair{PathPolicy::repair, false};
  auto repaired = validate_item({"Q", {"a.py", "ghost.py", "/abs.py"}}, task, snap, repair);
  ASSERT_TRUE(repaired.pair);
  EXPECT_EQ(repaired.pair->answer_paths, rps({"a.py"}));
  EXPECT_EQ(repaired.dropped_paths, 2u);
  auto all_gone = validate_item({"Q", {"ghost.py"}}, task, snap, repair);
  EXPECT_FALSE(all_gone.pair);
  EXPECT_EQ(all_gone.reason, "cardinality");
}

TEST(Validate, DuplicatesCollapse) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py"});
  auto out = validate_item({"Q", {"a.py", "a.py", "./a.py"}}, task_for(StrategyId::S1, {"a.py"}), snap, {});
  ASSERT_TRUE(out.pair);
  EXPECT_EQ(out.pair->answer_paths, rps({"a.py"}));
}

TEST(Validate, OtherReasons) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py", "c.py", "d.py", "e.py"});
  auto s1 = task_for(StrategyId::S1, {"a.py", "b.py", "c.py", "d.py", "e.py"});
  EXPECT_EQ(validate_item({"   ", {"a.py"}}, s1, snap, {}).reason, "empty_question");
  EXPECT_EQ(validate_item({"Q", {"a.py", "b.py", "c.py", "d.py"}}, s1, snap, {}).reason, "cardinality");
  EXPECT_EQ(validate_item({"Q", {}}, s1, snap, {}).reason, "cardinality");
  auto narrow = task_for(StrategyId::S6, {"a.py", "b.py"});
  EXPECT_EQ(validate_item({"Q", {"c.py"}}, narrow, snap, {}).reason, "outside_manifest");
  auto s2 = task_for(StrategyId::S2, {"a.py"});
  EXPECT_EQ(validate_item({"Q", {}}, s2, snap, {}).reason, "empty_answer");
  auto kept = validate_item({"Q", {}}, s2, snap, {PathPolicy::strict, true});
  ASSERT_TRUE(kept.pair);
  EXPECT_TRUE(kept.pair->answer_paths.empty());
  auto spaced = validate_item({"  Where   is\tit? ", {"a.py"}}, s2, snap, {});
  ASSERT_TRUE(spaced.pair);
  EXPECT_EQ(spaced.pair->question, "Where is it?");
}

TEST(PairId, StableAndDistinct) {
  auto a = make_pair_id("Q", rps({"a.py"}), StrategyId::S1);
  EXPECT_EQ(a, make_pair_id("Q", rps({"a.py"}), StrategyId::S1));
  EXPECT_NE(a, make_pair_id("Q", rps({"a.py"}), StrategyId::S2));
  EXPECT_NE(a, make_pair_id("Q", rps({"b.py"}), StrategyId::S1));
  EXPECT_NE(a, make_pair_id("Q.", rps({"a.py"}), StrategyId::S1));
}

TEST(Dedup, ExactUpToCaseAndSpacing) {
  auto out = dedup({pair("Where is the Cache?", {"a.py"}), pair("where  is the cache?", {"a.py"})}, {});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].question, "Where is the Cache?");
}

TEST(Dedup, SameQuestionDifferentAnswersKept) {
  auto out = dedup({pair("Where is the cache?", {"a.py"}), pair("Where is the cache?", {"b.py"})}, {});
  EXPECT_EQ(out.size(), 2u);
}

TEST(Dedup, NearDuplicateAtJaccardPointNine) {
  const std::string a = "how does the storage layer persist key to disk after writes";
  const std::string b = a + " completes";
  ASSERT_NEAR(brute_jaccard(a, b), 0.9, 1e-12);
  EXPECT_NEAR(trigram_jaccard(a, b), brute_jaccard(a, b), 1e-12);
  CurationReport report;
  auto same = dedup({pair(a, {"s.py"}), pair(b, {"s.py"})}, {}, &report);
  ASSERT_EQ(same.size(), 1u);
  EXPECT_EQ(same[0].question, a);
  EXPECT_EQ(report.dedup_removed, 1u);
  auto diff = dedup({pair(a, {"s.py"}), pair(b, {"t.py"})}, {});
  EXPECT_EQ(diff.size(), 2u);
  auto off = dedup({pair(a, {"s.py"}), pair(b, {"s.py"})}, {false, 0.85});
  EXPECT_EQ(off.size(), 2u);
}

TEST(Dedup, JaccardMatchesBruteForceOnRandomText) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab{"cache", "store", "key", "value", "disk", "net", "server", "client", "read"};
  for (int i = 0; i < 500; ++i) {
    auto sentence = [&] {
      std::string s;
      const auto n = 3 + uniform_below(rng, 10);
      for (std::uint64_t k = 0; k < n; ++k) s += (k ? " " : "") + vocab[uniform_below(rng, vocab.size())];
      return s;
    };
    auto a = sentence(), b = sentence();
    EXPECT_NEAR(trigram_jaccard(a, b), brute_jaccard(a, b), 1e-12) << a << " | " << b;
  }
  EXPECT_EQ(trigram_jaccard("hi there", "Hi, there!"), 1.0);
  EXPECT_EQ(trigram_jaccard("hi there", "hi you"), 0.0);
}

TEST(Dedup, IdempotentAndStable) {
  std::vector<QaPair> in;
  for (int i = 0; i < 30; ++i) in.push_back(pair("Question number " + std::to_string(i % 7), {"f" + std::to_string(i % 3) + ".py"}));
  auto once = dedup(in, {});
  EXPECT_EQ(dedup(once, {}), once);
  for (std::size_t i = 1; i < once.size(); ++i) {
    auto pos = [&](const QaPair& p) {
      return std::find_if(in.begin(), in.end(), [&](const QaPair& q) { return q.id == p.id; }) - in.begin();
    };
    EXPECT_LT(pos(once[i - 1]), pos(once[i]));
  }
}

TEST(Balance, DefaultCapFromMedian) {
  std::map<StrategyId, std::uint64_t> counts{{StrategyId::S1, 1000}, {StrategyId::S2, 50}, {StrategyId::S3, 60},
                                             {StrategyId::S4, 70},   {StrategyId::S5, 40}, {StrategyId::S6, 80}};
  // Sorted: 40 50 60 70 80 1000, median (60+70)/2 = 65.
  EXPECT_EQ(default_balance_cap(counts), 130u);
  EXPECT_EQ(default_balance_cap({{StrategyId::S1, 3}, {StrategyId::S2, 9}, {StrategyId::S3, 5}}), 10u);
  EXPECT_EQ(default_balance_cap({}), 0u);

  std::vector<QaPair> pairs;
  for (const auto& [s, n] : counts) {
    for (std::uint64_t i = 0; i < n; ++i) pairs.push_back(pair("q" + std::to_string(i), {"a.py"}, s));
  }
  CurationReport report;
  auto out = balance(pairs, BalanceConfig{}, &report);
  std::map<StrategyId, std::uint64_t> got;
  for (const auto& p : out) ++got[p.strategy];
  EXPECT_EQ(got[StrategyId::S1], 130u);
  for (auto s : {StrategyId::S2, StrategyId::S3, StrategyId::S4, StrategyId::S5, StrategyId::S6}) EXPECT_EQ(got[s], counts[s]);
  EXPECT_EQ(report.balance_removed_per_strategy["S1"], 870u);
  // Input order is preserved among survivors.
  std::size_t last = 0;
  for (const auto& p : out) {
    auto at = static_cast<std::size_t>(std::find(pairs.begin(), pairs.end(), p) - pairs.begin());
    EXPECT_GE(at, last);
    last = at;
  }
  EXPECT_EQ(balance(pairs, BalanceConfig{}), out);
  BalanceConfig other;
  other.seed = 1;
  EXPECT_NE(balance(pairs, other), out);
}

TEST(Balance, ExclusionsCapsAndIdentity) {
  std::vector<QaPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back(pair("a" + std::to_string(i), {"a.py"}, StrategyId::S1));
  for (int i = 0; i < 10; ++i) pairs.push_back(pair("b" + std::to_string(i), {"a.py"}, StrategyId::S2));
  BalanceConfig excl;
  excl.exclusions = {StrategyId::S1};
  auto out = balance(pairs, excl);
  EXPECT_EQ(out.size(), 10u);
  for (const auto& p : out) EXPECT_NE(p.strategy, StrategyId::S1);
  EXPECT_EQ(balance(pairs, BalanceConfig{}), pairs);
  BalanceConfig capped;
  capped.caps[StrategyId::S2] = 3;
  auto c = balance(pairs, capped);
  EXPECT_EQ(c.size(), 13u);
  EXPECT_EQ(balance(c, capped), c);
}

TEST(Split, Sizes) {
  EXPECT_EQ(train_size(10, 0.8), 8u);
  EXPECT_EQ(train_size(3332, 0.8), 2665u);
  EXPECT_EQ(train_size(33789, 0.8), 27031u);
  EXPECT_EQ(train_size(5, 0.5), 2u);  // 2.5 rounds down
  std::vector<QaPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back(pair("q" + std::to_string(i), {"a.py"}));
  auto ds = split_dataset(pairs, 0.8, 0);
  EXPECT_EQ(ds.side(Side::train).size(), 8u);
  EXPECT_EQ(ds.side(Side::test).size(), 2u);
}

TEST(Split, LargeStratifiedPartition) {
  std::mt19937_64 rng(3);
  std::vector<QaPair> pairs;
  const std::vector<std::string> paths{"a.py", "b.py", "c.py", "d.py"};
  for (int i = 0; i < 3332; ++i) {
    std::vector<std::string> ans(paths.begin(), paths.begin() + 1 + static_cast<long>(uniform_below(rng, 4)));
    pairs.push_back(pair("q" + std::to_string(i), ans, kAllStrategies[uniform_below(rng, 6)]));
  }
  auto ds = split_dataset(pairs, 0.8, 42);
  auto train = ds.side(Side::train), test = ds.side(Side::test);
  EXPECT_EQ(train.size(), 2665u);
  EXPECT_EQ(test.size(), 667u);
  std::set<std::string> ids;
  for (const auto& p : train) ids.insert(p.id);
  for (const auto& p : test) EXPECT_TRUE(ids.insert(p.id).second);
  EXPECT_EQ(ids.size(), pairs.size());
  std::map<std::string, std::pair<int, int>> strata;
  for (const auto& p : pairs) {
    auto key = std::string(to_string(p.strategy)) + "|" + cardinality_bucket(p.answer_paths.size());
    (ds.split.at(p.id) == Side::train ? strata[key].first : strata[key].second)++;
  }
  for (const auto& [key, c] : strata) {
    EXPECT_GT(c.first, 0) << key;
    EXPECT_GT(c.second, 0) << key;
  }
  EXPECT_EQ(split_dataset(pairs, 0.8, 42).split_json().dump(), ds.split_json().dump());
  EXPECT_NE(split_dataset(pairs, 0.8, 43).split_json().dump(), ds.split_json().dump());
}

TEST(Split, SmallStrataStillReachBothSides) {
  std::vector<QaPair> pairs;
  for (auto s : kAllStrategies) {
    pairs.push_back(pair("x" + std::string(to_string(s)), {"a.py"}, s));
    pairs.push_back(pair("y" + std::string(to_string(s)), {"a.py"}, s));
  }
  auto ds = split_dataset(pairs, 0.8, 0);
  EXPECT_EQ(ds.side(Side::train).size(), 9u);
  EXPECT_EQ(ds.side(Side::test).size(), 3u);
}

TEST(Split, Errors) {
  std::vector<QaPair> pairs{pair("a", {"a.py"}), pair("b", {"a.py"})};
  EXPECT_THROW(split_dataset(pairs, 0.0, 0), std::invalid_argument);
  EXPECT_THROW(split_dataset(pairs, 1.0, 0), std::invalid_argument);
  EXPECT_THROW(split_dataset({pairs[0], pairs[0]}, 0.8, 0), std::invalid_argument);
  auto ds = split_dataset(pairs, 0.5, 0);
  EXPECT_EQ(ds.side(Side::train).size(), 1u);
  EXPECT_EQ(ds.side(Side::test).size(), 1u);
}

TEST(Split, SidecarRoundTrip) {
  std::vector<QaPair> pairs;
  for (int i = 0; i < 20; ++i) pairs.push_back(pair("q" + std::to_string(i), {"a.py"}));
  auto ds = split_dataset(pairs, 0.8, 9);
  auto doc = json::parse(ds.split_json().dump());
  EXPECT_EQ(doc["assignments"].size(), 20u);
  auto back = Dataset::from_parts(pairs, doc);
  EXPECT_EQ(back.split, ds.split);
  EXPECT_EQ(back.seed, 9u);
}

TEST(CardinalityBucket, Values) {
  EXPECT_EQ(cardinality_bucket(0), "0");
  EXPECT_EQ(cardinality_bucket(1), "1");
  EXPECT_EQ(cardinality_bucket(2), "2");
  EXPECT_EQ(cardinality_bucket(3), "3+");
  EXPECT_EQ(cardinality_bucket(9), "3+");
}

TEST(Export, TrainRecordsAreBitExact) {
  auto snap = make_snapshot(std::vector<std::string>{"app.py", "src/flask/app.py", "src/flask/cli.py", "src/flask/config.py"});
  std::vector<QaPair> pairs{pair("Where is the app?", {"app.py"}),
                            pair("How is config loaded by the CLI?",
                                 {"src/flask/app.py", "src/flask/cli.py", "src/flask/config.py"}, StrategyId::S2)};
  Dataset ds;
  ds.pairs = pairs;
  for (const auto& p : pairs) ds.split[p.id] = Side::train;
  auto text = export_training(ds, Side::train, snap);
  std::istringstream in(text);
  std::vector<json> recs;
  for (std::string line; std::getline(in, line);) recs.push_back(json::parse(line));
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0]["id"], pairs[0].id);
  EXPECT_EQ(recs[0]["strategy"], "S1");
  ASSERT_EQ(recs[0]["messages"].size(), 3u);
  EXPECT_EQ(recs[0]["messages"][0]["role"], "system");
  EXPECT_EQ(recs[0]["messages"][0]["content"], std::string(inference_system_text()));
  EXPECT_EQ(recs[0]["messages"][1]["content"], "Question: Where is the app?");
  EXPECT_EQ(recs[0]["messages"][2]["role"], "assistant");
  EXPECT_EQ(recs[0]["messages"][2]["content"], R"(["app.py"])");
  EXPECT_EQ(recs[1]["messages"][2]["content"], R"(["src/flask/app.py","src/flask/cli.py","src/flask/config.py"])");
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.find('\r'), std::string::npos);
}

TEST(Export, TestSideCarriesGoldAndRoundTrips) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py"});
  std::vector<QaPair> pairs;
  for (int i = 0; i < 10; ++i) pairs.push_back(pair("Question " + std::to_string(i) + "?", {i % 2 ? "a.py" : "b.py"}));
  auto ds = split_dataset(pairs, 0.8, 1);
  auto test_text = export_training(ds, Side::test, snap);
  auto first = json::parse(test_text.substr(0, test_text.find('\n')));
  EXPECT_EQ(first["messages"].size(), 2u);
  EXPECT_TRUE(first["gold"].is_array());
  for (auto side : {Side::train, Side::test}) {
    auto back = import_export(export_training(ds, side, snap));
    auto expect = ds.side(side);
    ASSERT_EQ(back.size(), expect.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
      EXPECT_EQ(back[i].id, expect[i].id);
      EXPECT_EQ(back[i].question, expect[i].question);
      EXPECT_EQ(back[i].answer_paths, expect[i].answer_paths);
      EXPECT_EQ(back[i].strategy, expect[i].strategy);
    }
  }
  auto listed = export_training(ds, Side::train, snap, {InferenceMode::with_file_list, 4000});
  auto rec = json::parse(listed.substr(0, listed.find('\n')));
  EXPECT_NE(rec["messages"][0]["content"].get<std::string>().find("b.py"), std::string::npos);
}

TEST(PairsJsonl, RoundTrip) {
  std::vector<QaPair> pairs{pair("a?", {"a.py"}), pair("b?", {"a.py", "b.py"}, StrategyId::S4)};
  auto text = pairs_to_jsonl(pairs);
  EXPECT_EQ(pairs_from_jsonl(text), pairs);
  auto first = nlohmann::ordered_json::parse(text.substr(0, text.find('\n')));
  std::vector<std::string> keys;
  for (auto it = first.begin(); it != first.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"id", "question", "answer_paths", "strategy", "task_id"}));
}

TEST(Curate, JoinsAndReports) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py"});
  auto t1 = task_for(StrategyId::S1, {"a.py", "b.py"});
  t1.id = "S1-0000";
  auto t2 = task_for(StrategyId::S2, {"a.py", "b.py"});
  t2.id = "S2-0000";
  std::vector<RawCompletion> comps{
      {"S1-0000", R"([{"question":"What is a?","relevant_file_paths":["a.py"]},{"question":"Ghost?","relevant_file_paths":["g.py"]}])", 0, 1, "x", true, ""},
      {"S2-0000", R"(ok: [{"question":"what is  A?","relevant_file_paths":["a.py"]},{"question":"Both?","relevant_file_paths":["b.py","a.py"]}])", 0, 1, "x", true, ""},
      {"S9-0000", "[]", 0, 1, "x", true, ""},
  };
  auto result = curate({t1, t2}, comps, snap, CurationConfig{});
  const auto& r = result.report;
  EXPECT_EQ(r.items_in, 4u);
  EXPECT_EQ(r.accepted, 3u);
  EXPECT_EQ(r.rejected_by_reason.at("unknown_path"), 1u);
  EXPECT_EQ(r.accepted + r.rejected_total(), r.items_in);
  EXPECT_EQ(r.orphan_completions, 1u);
  EXPECT_EQ(r.validity.strict, 1u);
  EXPECT_EQ(r.validity.salvaged, 1u);
  // "what is A?" from S2 differs in strategy but shares the exact key.
  EXPECT_EQ(r.dedup_removed, 1u);
  ASSERT_EQ(result.pairs.size(), 2u);
  EXPECT_EQ(r.final_pairs, 2u);
  EXPECT_EQ(result.pairs[1].answer_paths, rps({"a.py", "b.py"}));
  for (const auto& p : result.pairs) {
    for (const auto& path : p.answer_paths) EXPECT_TRUE(snap.contains(path.str()));
  }
}
