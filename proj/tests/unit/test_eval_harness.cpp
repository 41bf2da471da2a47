#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "repoqa/eval_harness.hpp"
#include "repoqa/kernels.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;
using nlohmann::json;
using Paths = std::vector<std::string>;

namespace {

QaPair gold_pair(const std::string& id, const Paths& paths, StrategyId s = StrategyId::S1) {
  QaPair p;
  p.id = id;
  p.question = "Question " + id + "?";
  p.answer_paths = rps(paths);
  p.strategy = s;
  return p;
}

// Reference metrics over std::set.
struct Ref {
  int em;
  int recall;
  double micro;
};
Ref reference(const Paths& pred, const Paths& gold) {
  std::set<std::string> p(pred.begin(), pred.end()), g(gold.begin(), gold.end());
  std::size_t k = 0;
  for (const auto& x : g) k += p.count(x);
  return {p == g ? 1 : 0, k > 0 ? 1 : 0, static_cast<double>(k) / static_cast<double>(g.size())};
}

}  // namespace

TEST(Scoring, ExactMatchExamples) {
  EXPECT_EQ(score_exact_match({"blueprints.py", "app.py"}, {"app.py", "blueprints.py"}), 1);
  EXPECT_EQ(score_exact_match({"json/provider.py", "json/tag.py"}, {"json/provider.py"}), 0);
  EXPECT_EQ(score_exact_match({}, {"a.py"}), 0);
  EXPECT_EQ(score_exact_match({"a.py", "a.py"}, {"a.py"}), 1);
}

TEST(Scoring, RecallExamples) {
  EXPECT_EQ(score_recall({"a.py", "x.py"}, {"a.py", "b.py"}), 1);
  EXPECT_EQ(score_recall({"x.py"}, {"a.py"}), 0);
  EXPECT_EQ(score_recall({"a.py", "b.py"}, {"a.py", "b.py"}), 1);
}

TEST(Scoring, MicroExamples) {
  EXPECT_NEAR(score_micro({"a.py"}, {"a.py", "b.py", "c.py"}), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(score_micro({"a", "b", "c"}, {"c", "b", "a"}), 1.0);
  EXPECT_EQ(score_micro({"a", "b"}, {"a", "b", "c", "d"}), 0.5);
}

TEST(Scoring, EmptyGoldIsError) {
  EXPECT_THROW(score_exact_match({"a"}, {}), ScoringError);
  EXPECT_THROW(score_recall({"a"}, {}), ScoringError);
  EXPECT_THROW(score_micro({"a"}, {}), ScoringError);
}

TEST(Scoring, MatchesReferenceOnRandomSets) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 5000; ++i) {
    Paths pred, gold;
    const auto np = uniform_below(rng, 6), ng = 1 + uniform_below(rng, 5);
    for (std::uint64_t j = 0; j < np; ++j) pred.push_back("f" + std::to_string(uniform_below(rng, 8)));
    for (std::uint64_t j = 0; j < ng; ++j) gold.push_back("f" + std::to_string(uniform_below(rng, 8)));
    auto ref = reference(pred, gold);
    const int em = score_exact_match(pred, gold), rc = score_recall(pred, gold);
    const double mi = score_micro(pred, gold);
    ASSERT_EQ(em, ref.em);
    ASSERT_EQ(rc, ref.recall);
    ASSERT_NEAR(mi, ref.micro, 1e-15);
    EXPECT_LE(em, rc);
    EXPECT_LE(em, static_cast<int>(std::ceil(mi)));
    EXPECT_EQ(rc == 1, mi > 0);
    auto shuffled = pred;
    stable_shuffle(rng, shuffled);
    shuffled.insert(shuffled.end(), pred.begin(), pred.end());
    EXPECT_EQ(score_exact_match(shuffled, gold), em);
    EXPECT_EQ(score_micro(shuffled, gold), mi);
  }
}

TEST(Scoring, SupersetBreaksExactMatchOnly) {
  Paths gold{"a.py", "b.py"};
  Paths pred = gold;
  pred.push_back("z.py");
  EXPECT_EQ(score_exact_match(gold, gold), 1);
  EXPECT_EQ(score_exact_match(pred, gold), 0);
  EXPECT_EQ(score_recall(pred, gold), 1);
  EXPECT_EQ(score_micro(pred, gold), 1.0);
}

TEST(Aggregate, WorkedExample) {
  std::vector<PredictionRecord> recs(2);
  recs[0].pair_id = "q1";
  recs[0].predicted_paths = {"a.py"};
  recs[0].parse_validity = Validity::strict;
  recs[1].pair_id = "q2";
  recs[1].predicted_paths = {"d.py", "e.py"};
  recs[1].parse_validity = Validity::salvaged;
  std::map<std::string, Paths> gold{{"q1", {"a.py", "b.py", "c.py"}}, {"q2", {"d.py", "e.py"}}};
  std::map<std::string, StrategyId> strat{{"q1", StrategyId::S1}, {"q2", StrategyId::S4}};
  auto r = aggregate(recs, gold, strat);
  EXPECT_EQ(r.question_count, 2u);
  EXPECT_NEAR(r.micro_avg_recall, (1.0 / 3.0 + 1.0) / 2.0, 1e-12);
  EXPECT_NEAR(r.micro_avg_recall, 0.6667, 5e-5);
  EXPECT_EQ(r.em, 0.5);
  EXPECT_EQ(r.recall, 1.0);
  EXPECT_EQ(r.validity_rate, 1.0);
  EXPECT_EQ(r.by_strategy.at("S1").question_count, 1u);
  EXPECT_EQ(r.by_strategy.at("S4").em, 1.0);
  EXPECT_EQ(r.by_cardinality.at("3+").micro_avg_recall, 1.0 / 3.0);
  EXPECT_EQ(r.by_cardinality.at("2").question_count, 1u);
}

TEST(Aggregate, OrderIndependentAndMatchesBruteForce) {
  std::mt19937_64 rng(21);
  std::vector<PredictionRecord> recs;
  std::map<std::string, Paths> gold;
  std::map<std::string, StrategyId> strat;
  for (int i = 0; i < 400; ++i) {
    const auto id = "p" + std::to_string(i);
    Paths g, p;
    for (std::uint64_t j = 0, n = 1 + uniform_below(rng, 4); j < n; ++j) g.push_back("f" + std::to_string(uniform_below(rng, 6)));
    for (std::uint64_t j = 0, n = uniform_below(rng, 4); j < n; ++j) p.push_back("f" + std::to_string(uniform_below(rng, 6)));
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    gold[id] = g;
    strat[id] = kAllStrategies[uniform_below(rng, 6)];
    PredictionRecord r;
    r.pair_id = id;
    r.predicted_paths = p;
    r.parse_validity = uniform_below(rng, 10) == 0 ? Validity::invalid : Validity::strict;
    if (r.parse_validity == Validity::invalid) r.predicted_paths.clear();
    recs.push_back(r);
  }
  double em = 0, rc = 0, mi = 0, valid = 0;
  for (const auto& r : recs) {
    auto ref = reference(r.predicted_paths, gold[r.pair_id]);
    em += ref.em;
    rc += ref.recall;
    mi += ref.micro;
    valid += r.parse_validity != Validity::invalid;
  }
  auto report = aggregate(recs, gold, strat, Execution::serial);
  EXPECT_NEAR(report.em, em / 400, 1e-12);
  EXPECT_NEAR(report.recall, rc / 400, 1e-12);
  EXPECT_NEAR(report.micro_avg_recall, mi / 400, 1e-12);
  EXPECT_NEAR(report.validity_rate, valid / 400, 1e-12);
  std::uint64_t per_strategy = 0, per_card = 0;
  for (const auto& [k, m] : report.by_strategy) per_strategy += m.question_count;
  for (const auto& [k, m] : report.by_cardinality) per_card += m.question_count;
  EXPECT_EQ(per_strategy, 400u);
  EXPECT_EQ(per_card, 400u);
  auto shuffled = recs;
  stable_shuffle(rng, shuffled);
  EXPECT_EQ(aggregate(shuffled, gold, strat, Execution::parallel).to_json().dump(), report.to_json().dump());
}

TEST(Aggregate, Errors) {
  PredictionRecord r;
  r.pair_id = "missing";
  EXPECT_THROW(
      {
        try {
          aggregate({r}, std::map<std::string, Paths>{}, {});
        } catch (const std::exception& e) {
          EXPECT_NE(std::string(e.what()).find("missing"), std::string::npos);
          throw;
        }
      },
      std::exception);
  std::map<std::string, Paths> gold{{"missing", {"a.py"}}};
  EXPECT_THROW(aggregate({r, r}, gold, {}), std::runtime_error);
  auto empty = aggregate({}, gold, {});
  EXPECT_EQ(empty.question_count, 0u);
  EXPECT_EQ(empty.em, 0.0);
}

TEST(MakeRecord, ParsesAndNormalizes) {
  auto snap = make_snapshot(std::vector<std::string>{"src/click/core.py", "src/click/types.py"}, "click");
  auto r = make_record("id1", R"(["src/click/core.py","src/click/types.py"])", snap);
  EXPECT_EQ(r.parse_validity, Validity::strict);
  EXPECT_EQ(r.predicted_paths, (Paths{"src/click/core.py", "src/click/types.py"}));
  EXPECT_EQ(r.member_count, 2u);
  auto messy = make_record("id2", R"(Answer: ["./src/click/types.py", "click/src/click/core.py", "ghost.py", "src/click/types.py"])", snap);
  EXPECT_EQ(messy.parse_validity, Validity::salvaged);
  EXPECT_EQ(messy.predicted_paths, (Paths{"ghost.py", "src/click/core.py", "src/click/types.py"}));
  EXPECT_EQ(messy.member_count, 2u);
  auto bad = make_record("id3", "no idea", snap);
  EXPECT_EQ(bad.parse_validity, Validity::invalid);
  EXPECT_TRUE(bad.predicted_paths.empty());
}

TEST(RunPredictor, OracleEmptyAndFailures) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py", "c.py"});
  std::vector<QaPair> pairs{gold_pair("x", {"a.py"}), gold_pair("y", {"b.py", "c.py"}, StrategyId::S2)};
  OraclePredictor oracle;
  auto recs = run_predictor(pairs, oracle, snap);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[1].predicted_paths, (Paths{"b.py", "c.py"}));
  auto rep = aggregate(recs, pairs);
  EXPECT_EQ(rep.em, 1.0);
  EXPECT_EQ(rep.recall, 1.0);
  EXPECT_EQ(rep.micro_avg_recall, 1.0);
  EmptyPredictor empty;
  auto zero = aggregate(run_predictor(pairs, empty, snap), pairs);
  EXPECT_EQ(zero.em, 0.0);
  EXPECT_EQ(zero.recall, 0.0);
  EXPECT_EQ(zero.micro_avg_recall, 0.0);
  EXPECT_EQ(zero.validity_rate, 1.0);

  FilePredictor partial(R"({"pair_id":"x","raw_text":"[\"a.py\"]"})"
                        "\n");
  auto recs2 = run_predictor(pairs, partial, snap);
  EXPECT_EQ(recs2[0].parse_validity, Validity::strict);
  EXPECT_EQ(recs2[1].parse_validity, Validity::invalid);
}

TEST(RunPredictor, ChatPredictorUsesInferencePrompt) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "b.py"});
  std::vector<QaPair> pairs;
  for (int i = 0; i < 12; ++i) pairs.push_back(gold_pair("p" + std::to_string(i), {i % 2 ? "a.py" : "b.py"}));
  std::mutex mu;
  std::vector<ChatRequest> seen;
  FunctionBackend backend([&](const ChatRequest& req, const GenerationTask*) {
    {
      std::lock_guard lock(mu);
      seen.push_back(req);
    }
    return BackendReply{200, "[\"a.py\"]", 0, {}};
  });
  ChatPredictorConfig cfg;
  cfg.model_id = "m";
  ChatPredictor chat(backend, snap, cfg, [](auto) {});
  auto recs = run_predictor(pairs, chat, snap);
  ASSERT_EQ(recs.size(), pairs.size());
  ASSERT_EQ(seen.size(), pairs.size());
  for (const auto& req : seen) {
    EXPECT_EQ(req.temperature, 0.0);
    EXPECT_EQ(req.max_output_tokens, 300u);
    EXPECT_EQ(req.messages[0].content, std::string(inference_system_text()));
    EXPECT_EQ(req.messages[1].content.rfind("Question: ", 0), 0u);
  }
  auto rep = aggregate(recs, pairs);
  EXPECT_EQ(rep.em, 0.5);
  FunctionBackend denied([](const ChatRequest&, const GenerationTask*) { return BackendReply{401, "", 0, {}}; });
  ChatPredictor locked(denied, snap, cfg, [](auto) {});
  EXPECT_THROW(run_predictor(pairs, locked, snap), AuthError);
}

TEST(Records, JsonlRoundTripAndFinetuneInterface) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py"});
  std::vector<PredictionRecord> recs{make_record("p1", "[\"a.py\"]", snap), make_record("p2", "garbage", snap)};
  auto text = records_to_jsonl(recs);
  auto back = records_from_jsonl(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].predicted_paths, recs[0].predicted_paths);
  EXPECT_EQ(back[1].parse_validity, Validity::invalid);
  auto first = nlohmann::ordered_json::parse(text.substr(0, text.find('\n')));
  std::vector<std::string> keys;
  for (auto it = first.begin(); it != first.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (Paths{"pair_id", "raw_text", "predicted_paths", "parse_validity", "member_count"}));
  // The fine-tuning kit writes only pair_id and raw_text.
  FilePredictor external("{\"pair_id\":\"p1\",\"raw_text\":\"[\\\"a.py\\\"]\"}\n\n{\"pair_id\":\"p2\",\"raw_text\":\"[]\"}\n");
  EXPECT_EQ(external.size(), 2u);
  EXPECT_EQ(external.predict(gold_pair("p2", {"a.py"})), "[]");
  EXPECT_THROW(external.predict(gold_pair("p9", {"a.py"})), std::exception);
}

TEST(Report, JsonRoundTripAndMarkdown) {
  std::vector<PredictionRecord> recs(1);
  recs[0].pair_id = "q";
  recs[0].predicted_paths = {"a.py"};
  recs[0].parse_validity = Validity::strict;
  auto rep = aggregate(recs, {{"q", {"a.py", "b.py", "c.py"}}}, {{"q", StrategyId::S3}});
  auto back = EvalReport::from_json(json::parse(rep.to_json().dump()));
  EXPECT_EQ(back.to_json().dump(), rep.to_json().dump());
  auto md = render_markdown({{"flask", rep}});
  EXPECT_NE(md.find("| Repo/Config | EM | Recall | Micro-Recall |"), std::string::npos);
  EXPECT_NE(md.find("| flask | 0.0000 | 1.0000 | 0.3333 |"), std::string::npos);
}

TEST(Kernels, ScoreRecordsSerialEqualsParallel) {
  std::mt19937_64 rng(8);
  std::vector<Paths> preds(3000), golds(3000);
  std::vector<ScoreInput> inputs;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::uint64_t j = 0, n = uniform_below(rng, 5); j < n; ++j) preds[i].push_back("f" + std::to_string(uniform_below(rng, 9)));
    for (std::uint64_t j = 0, n = 1 + uniform_below(rng, 4); j < n; ++j) golds[i].push_back("f" + std::to_string(uniform_below(rng, 9)));
  }
  for (std::size_t i = 0; i < preds.size(); ++i) inputs.push_back({&preds[i], &golds[i]});
  auto s = score_records(inputs, Execution::serial);
  auto p = score_records(inputs, Execution::parallel);
  ASSERT_EQ(s.size(), p.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto ref = reference(preds[i], golds[i]);
    EXPECT_EQ(s[i].em, ref.em);
    EXPECT_EQ(s[i].micro, ref.micro);
    EXPECT_EQ(p[i].em, s[i].em);
    EXPECT_EQ(p[i].recall, s[i].recall);
    EXPECT_EQ(p[i].micro, s[i].micro);
  }
  Paths empty;
  std::vector<ScoreInput> bad{{&preds[0], &empty}};
  EXPECT_THROW(score_records(bad, Execution::parallel), ScoringError);
}
