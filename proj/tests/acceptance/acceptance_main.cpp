// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 on any
// failure. Every expected value comes from an oracle in this file, never from
// the library under test.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "repoqa/bm25.hpp"
#include "repoqa/eval_harness.hpp"
#include "repoqa/pipeline.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;
using nlohmann::json;
using Paths = std::vector<std::string>;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Check {
 public:
  void expect(bool cond, const std::string& what) {
    if (!cond && out_.ok) {
      out_.ok = false;
      out_.detail = what;
    }
  }
  Outcome done(std::string summary) {
    if (out_.ok) out_.detail = std::move(summary);
    return out_;
  }

 private:
  Outcome out_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// ---- brute-force metric oracle --------------------------------------------------

struct RefScore {
  int em;
  int recall;
  double micro;
};

RefScore brute_score(const Paths& pred, const Paths& gold) {
  std::set<std::string> p(pred.begin(), pred.end()), g(gold.begin(), gold.end());
  std::size_t k = 0;
  for (const auto& x : g) {
    for (const auto& y : p) k += x == y;
  }
  return {p == g ? 1 : 0, k > 0 ? 1 : 0, static_cast<double>(k) / static_cast<double>(g.size())};
}

Outcome metric_oracle() {
  Check c;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  Paths universe;
  for (int i = 0; i < 20; ++i) universe.push_back("pkg/m" + std::to_string(i) + ".py");
  std::vector<PredictionRecord> recs;
  std::map<std::string, Paths> gold;
  std::map<std::string, StrategyId> strat;
  double em = 0, rc = 0, mi = 0;
  for (int i = 0; i < 10000; ++i) {
    Paths pred, g;
    for (std::uint64_t j = 0, n = uniform_below(rng, 7); j < n; ++j) pred.push_back(universe[uniform_below(rng, 20)]);
    for (std::uint64_t j = 0, n = 1 + uniform_below(rng, 5); j < n; ++j) g.push_back(universe[uniform_below(rng, 20)]);
    if (uniform_below(rng, 5) == 0) pred = g;
    auto ref = brute_score(pred, g);
    c.expect(score_exact_match(pred, g) == ref.em, "EM mismatch at case " + std::to_string(i));
    c.expect(score_recall(pred, g) == ref.recall, "recall mismatch at case " + std::to_string(i));
    c.expect(std::abs(score_micro(pred, g) - ref.micro) <= 1e-12, "micro mismatch at case " + std::to_string(i));
    em += ref.em;
    rc += ref.recall;
    mi += ref.micro;
    const auto id = "q" + std::to_string(i);
    PredictionRecord r;
    r.pair_id = id;
    std::set<std::string> uniq(pred.begin(), pred.end());
    r.predicted_paths.assign(uniq.begin(), uniq.end());
    r.parse_validity = Validity::strict;
    recs.push_back(std::move(r));
    gold[id] = g;
    strat[id] = kAllStrategies[uniform_below(rng, 6)];
  }
  auto report = aggregate(recs, gold, strat);
  c.expect(std::abs(report.em - em / 10000) <= 1e-12, "aggregate EM differs");
  c.expect(std::abs(report.recall - rc / 10000) <= 1e-12, "aggregate recall differs");
  c.expect(std::abs(report.micro_avg_recall - mi / 10000) <= 1e-12, "aggregate micro differs");
  const double secs = seconds_since(t0);
  c.expect(secs < 5.0, "runtime " + std::to_string(secs) + " s exceeds 5 s");
  std::ostringstream s;
  s << "10000 cases, EM=" << report.em << " Recall=" << report.recall << " Micro=" << report.micro_avg_recall << " in "
    << secs << " s";
  return c.done(s.str());
}

Outcome worked_example() {
  Check c;
  const double v = score_micro({"src/a.py"}, {"src/a.py", "src/b.py", "src/c.py"});
  c.expect(std::abs(v - 1.0 / 3.0) <= 1e-9, "micro-recall " + std::to_string(v));
  return c.done("micro-recall = " + std::to_string(v));
}

Outcome aggregate_example() {
  Check c;
  std::vector<PredictionRecord> recs(2);
  recs[0].pair_id = "a";
  recs[0].predicted_paths = {"x.py"};
  recs[1].pair_id = "b";
  recs[1].predicted_paths = {"p.py", "q.py"};
  auto r = aggregate(recs, {{"a", {"x.py", "y.py", "z.py"}}, {"b", {"p.py", "q.py"}}}, {});
  const double expect = (1.0 / 3.0 + 2.0 / 2.0) / 2.0;
  c.expect(std::abs(r.micro_avg_recall - 0.666667) <= 1e-6, "micro_avg_recall " + std::to_string(r.micro_avg_recall));
  c.expect(std::abs(r.micro_avg_recall - expect) <= 1e-12, "differs from hand formula");
  return c.done("micro_avg_recall = " + std::to_string(r.micro_avg_recall));
}

Outcome split_sizes() {
  Check c;
  struct Row {
    std::uint64_t total, train, test;
  };
  const std::vector<Row> rows{{3332, 2665, 667}, {3163, 2530, 633}, {367, 293, 74}, {33789, 27031, 6758}};
  std::mt19937_64 rng(17);
  std::string summary;
  for (const auto& row : rows) {
    std::vector<QaPair> pairs;
    pairs.reserve(row.total);
    for (std::uint64_t i = 0; i < row.total; ++i) {
      QaPair p;
      p.question = "synthetic question " + std::to_string(i);
      const auto n = 1 + uniform_below(rng, 4);
      for (std::uint64_t j = 0; j < n; ++j) p.answer_paths.push_back(rp("f" + std::to_string(j) + ".py"));
      p.strategy = kAllStrategies[uniform_below(rng, 6)];
      p.id = make_pair_id(p.question, p.answer_paths, p.strategy);
      pairs.push_back(std::move(p));
    }
    auto ds = split_dataset(pairs, 0.8, 0);
    const auto tr = ds.side(Side::train).size(), te = ds.side(Side::test).size();
    c.expect(tr == row.train && te == row.test, std::to_string(row.total) + " -> " + std::to_string(tr) + "/" +
                                                    std::to_string(te));
    std::set<std::string> ids;
    for (const auto& p : ds.side(Side::train)) ids.insert(p.id);
    for (const auto& p : ds.side(Side::test)) c.expect(ids.insert(p.id).second, "train and test overlap");
    c.expect(ids.size() == row.total, "split is not a cover");
    summary += (summary.empty() ? "" : ", ") + std::to_string(row.total) + "->" + std::to_string(tr) + "/" +
               std::to_string(te);
  }
  return c.done(summary);
}

// ---- path fuzz -------------------------------------------------------------------

Outcome path_fuzz() {
  Check c;
  std::mt19937_64 rng(99);
  Paths members;
  for (int i = 0; i < 30; ++i) members.push_back("lib/sub" + std::to_string(i % 4) + "/mod" + std::to_string(i) + ".py");
  auto snap = make_snapshot(members, "repo");
  const std::set<std::string> member_set(members.begin(), members.end());
  std::uint64_t accepted = 0, violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto strategy = kAllStrategies[uniform_below(rng, 6)];
    GenerationTask task;
    task.id = "t" + std::to_string(i);
    task.strategy = strategy;
    const auto bounds = path_bounds(strategy);
    task.min_paths = bounds.min_paths;
    task.max_paths = bounds.max_paths;
    Paths manifest = members;
    if (strategy == StrategyId::S6) {
      stable_shuffle(rng, manifest);
      manifest.resize(2 + uniform_below(rng, 4));
      std::sort(manifest.begin(), manifest.end());
    }
    task.manifest = rps(manifest);
    GeneratedItem item;
    item.question = uniform_below(rng, 50) == 0 ? "   " : "Where is thing " + std::to_string(i) + "?";
    for (std::uint64_t j = 0, n = uniform_below(rng, 7); j < n; ++j) {
      std::string p = uniform_below(rng, 3) == 0 ? members[uniform_below(rng, members.size())]
                                                 : manifest[uniform_below(rng, manifest.size())];
      switch (uniform_below(rng, 8)) {
        case 0:
          std::replace(p.begin(), p.end(), '/', '\\');
          break;
        case 1: p = "./" + p; break;
        case 2: p = "repo/" + p; break;
        case 3: p = "ghost/" + p; break;
        case 4: p = "/" + p; break;
        case 5: p = "../" + p; break;
        case 6: p = "  " + p + " "; break;
        default: break;
      }
      item.paths.push_back(p);
      if (uniform_below(rng, 4) == 0) item.paths.push_back(p);
    }
    stable_shuffle(rng, item.paths);
    ValidationPolicy policy{uniform_below(rng, 2) ? PathPolicy::strict : PathPolicy::repair,
                            uniform_below(rng, 4) == 0};
    auto out = validate_item(item, task, snap, policy);
    if (!out.pair) continue;
    ++accepted;
    const auto& ans = out.pair->answer_paths;
    bool bad = !std::is_sorted(ans.begin(), ans.end()) || std::adjacent_find(ans.begin(), ans.end()) != ans.end();
    for (const auto& p : ans) {
      bad |= member_set.count(p.str()) == 0;
      bad |= std::find(manifest.begin(), manifest.end(), p.str()) == manifest.end();
    }
    bad |= ans.size() > task.max_paths;
    bad |= ans.size() < task.min_paths;
    bad |= ans.empty() && !policy.keep_empty_answers;
    bad |= normalize_question(out.pair->question).empty();
    violations += bad;
  }
  c.expect(violations == 0, std::to_string(violations) + " violations");
  c.expect(accepted > 1000, "only " + std::to_string(accepted) + " accepted; fuzz too harsh to be meaningful");
  return c.done("10000 items, " + std::to_string(accepted) + " accepted, 0 violations");
}

// ---- S6 partition ----------------------------------------------------------------------

Outcome s6_partition() {
  Check c;
  std::mt19937_64 rng(606);
  std::uint64_t batches = 0, repos = 0;
  for (int round = 0; round < 60; ++round) {
    std::map<std::string, std::string> files;
    const auto n = 10 + uniform_below(rng, 191);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto size = uniform_below(rng, 8) == 0 ? 2000 + uniform_below(rng, 40000) : uniform_below(rng, 3000);
      std::string body;
      while (body.size() < size) body += "x_" + std::to_string(body.size()) + " = 1\n";
      files["d" + std::to_string(uniform_below(rng, 6)) + "/f" + std::to_string(i) + ".py"] = body;
    }
    auto snap = make_snapshot(files);
    auto contents = RepoContents::from_map(snap, files);
    GenConfig cfg;
    cfg.context_budget = 1500 + uniform_below(rng, 6000);
    StrategyInputs in{&snap, &contents, nullptr, nullptr, nullptr};
    auto tasks = build_tasks(in, StrategyId::S6, cfg);
    ++repos;
    std::map<std::string, int> seen;
    for (const auto& t : tasks) {
      ++batches;
      for (const auto& p : t.manifest) ++seen[p.str()];
      c.expect(t.manifest.size() <= 5, "batch of " + std::to_string(t.manifest.size()) + " files");
      if (t.manifest.size() > 1) {
        c.expect(t.manifest.size() >= 2, "clamp");
        c.expect(!t.truncated, "multi-file batch truncated");
        c.expect(estimate_tokens(t.context) <= cfg.context_budget, "batch " + t.id + " over budget");
      }
    }
    // Brute-force cover check against the file list.
    for (const auto& [path, body] : files) {
      auto it = seen.find(path);
      c.expect(it != seen.end() && it->second == 1, path + " covered " + (it == seen.end() ? "0" : std::to_string(it->second)) + " times");
    }
    c.expect(seen.size() == files.size(), "batches mention unknown files");
  }
  return c.done(std::to_string(repos) + " repos, " + std::to_string(batches) + " batches, exact partition");
}

// ---- dedup -------------------------------------------------------------------------------

Outcome dedup_idempotence() {
  Check c;
  std::mt19937_64 rng(31);
  const Paths words{"where", "is", "the", "cache", "store", "defined", "configured", "loaded", "server", "client"};
  std::uint64_t total_removed = 0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    std::vector<QaPair> pairs;
    const auto n = 20 + uniform_below(rng, 80);
    for (std::uint64_t i = 0; i < n; ++i) {
      QaPair p;
      if (!pairs.empty() && uniform_below(rng, 3) == 0) {
        // Variant of an earlier pair: case, spacing or one extra word.
        const auto& base = pairs[uniform_below(rng, pairs.size())];
        p.question = base.question;
        switch (uniform_below(rng, 3)) {
          case 0:
            for (auto& ch : p.question) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
            break;
          case 1: p.question = "  " + p.question + "   "; break;
          default: p.question += " " + words[uniform_below(rng, words.size())]; break;
        }
        p.answer_paths = uniform_below(rng, 4) ? base.answer_paths : rps({"other.py"});
      } else {
        for (std::uint64_t w = 0, m = 3 + uniform_below(rng, 10); w < m; ++w) {
          p.question += (w ? " " : "") + words[uniform_below(rng, words.size())];
        }
        p.answer_paths = rps({"f" + std::to_string(uniform_below(rng, 3)) + ".py"});
      }
      p.strategy = kAllStrategies[uniform_below(rng, 6)];
      p.id = make_pair_id(p.question, p.answer_paths, p.strategy) + std::to_string(i);
      pairs.push_back(std::move(p));
    }
    auto once = dedup(pairs, NearDupPolicy{});
    auto twice = dedup(once, NearDupPolicy{});
    c.expect(pairs_to_jsonl(once) == pairs_to_jsonl(twice), "corpus " + std::to_string(corpus) + " not idempotent");
    // Survivors appear in input order.
    std::size_t cursor = 0;
    for (const auto& p : once) {
      while (cursor < pairs.size() && pairs[cursor].id != p.id) ++cursor;
      c.expect(cursor < pairs.size(), "corpus " + std::to_string(corpus) + " reordered");
      ++cursor;
    }
    total_removed += pairs.size() - once.size();
  }
  c.expect(total_removed > 0, "no duplicates were generated");
  return c.done("100 corpora, " + std::to_string(total_removed) + " removed, idempotent and order-stable");
}

// ---- offline end-to-end ------------------------------------------------------------------

struct E2eState {
  bool ran = false;
  std::vector<QaPair> test_pairs;
  std::vector<PredictionRecord> oracle_records;
  RepoSnapshot snapshot;
};

bool valid_export_line(const std::string& line, bool train) {
  auto j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return false;
  if (!j.contains("id") || !j["id"].is_string() || !j.contains("strategy") || !j.contains("messages")) return false;
  const auto& m = j["messages"];
  if (!m.is_array() || m.size() != (train ? 3u : 2u)) return false;
  if (m[0]["role"] != "system" || m[1]["role"] != "user") return false;
  if (m[1]["content"].get<std::string>().rfind("Question: ", 0) != 0) return false;
  if (train) {
    if (m[2]["role"] != "assistant") return false;
    const auto content = m[2]["content"].get<std::string>();
    auto arr = json::parse(content, nullptr, false);
    if (!arr.is_array() || arr.empty() || arr.dump() != content) return false;
    auto paths = arr.get<Paths>();
    return std::is_sorted(paths.begin(), paths.end()) && std::adjacent_find(paths.begin(), paths.end()) == paths.end();
  }
  return j.contains("gold") && j["gold"].is_array() && !j["gold"].empty();
}

Outcome offline_e2e(E2eState& state) {
  Check c;
  const auto t0 = Clock::now();
  TempDir ws("acceptance-ws");
  PipelineConfig cfg;
  cfg.repo_root = fixture_repo();
  cfg.workspace = ws.path();
  cfg.strategies = {kAllStrategies.begin(), kAllStrategies.end()};
  std::ostringstream log;
  Workspace w{ws.path()};
  try {
    run_scan(cfg, log);
    run_summarize(cfg, log);
    ScriptedBackend scripted;
    run_gen(cfg, log, &scripted, [](auto) {});
    run_curate(cfg, log);
    run_split(cfg, log);
    run_export(cfg, log);
    run_eval(cfg, log);
    cfg.eval.predictor = "empty";
    run_eval(cfg, log);
  } catch (const std::exception& e) {
    c.expect(false, std::string("stage failed: ") + e.what());
    return c.done("");
  }
  const auto pairs = pairs_from_jsonl(read_text(w.dataset()));
  c.expect(pairs.size() >= 40, "only " + std::to_string(pairs.size()) + " accepted pairs");
  std::size_t lines = 0;
  for (bool train : {true, false}) {
    std::istringstream in(read_text(train ? w.train_export() : w.test_export()));
    for (std::string line; std::getline(in, line);) {
      ++lines;
      c.expect(valid_export_line(line, train), "schema violation: " + line.substr(0, 120));
    }
  }
  c.expect(lines == pairs.size(), "export line count differs from dataset");
  auto oracle = EvalReport::from_json(json::parse(read_text(w.report("oracle"))));
  auto empty = EvalReport::from_json(json::parse(read_text(w.report("empty"))));
  c.expect(oracle.em == 1.0 && oracle.recall == 1.0 && oracle.micro_avg_recall == 1.0, "oracle metrics not 1.0");
  c.expect(empty.em == 0.0 && empty.recall == 0.0 && empty.micro_avg_recall == 0.0, "empty metrics not 0.0");
  c.expect(oracle.question_count > 0, "no test questions");
  const double secs = seconds_since(t0);
  c.expect(secs < 30.0, "runtime " + std::to_string(secs) + " s");

  state.ran = true;
  state.test_pairs = import_export(read_text(w.test_export()));
  state.oracle_records = records_from_jsonl(read_text(w.predictions("oracle")));
  state.snapshot = RepoSnapshot::from_json(json::parse(read_text(w.snapshot())));
  std::ostringstream s;
  s << pairs.size() << " pairs, " << oracle.question_count << " test, oracle EM/Recall/Micro=1, empty=0, " << secs
    << " s";
  return c.done(s.str());
}

Outcome em_strictness(const E2eState& state) {
  Check c;
  c.expect(state.ran, "end-to-end run unavailable");
  std::map<std::string, Paths> gold;
  for (const auto& p : state.test_pairs) {
    Paths g;
    for (const auto& a : p.answer_paths) g.push_back(a.str());
    gold[p.id] = g;
  }
  std::size_t checked = 0;
  for (const auto& rec : state.oracle_records) {
    const auto& g = gold.at(rec.pair_id);
    auto before = brute_score(rec.predicted_paths, g);
    if (before.em != 1) continue;
    for (const auto& f : state.snapshot.files()) {
      if (std::find(g.begin(), g.end(), f.path.str()) != g.end()) continue;
      auto pred = rec.predicted_paths;
      pred.push_back(f.path.str());
      c.expect(score_exact_match(pred, g) == 0, "EM survived an extra path for " + rec.pair_id);
      c.expect(score_recall(pred, g) == before.recall, "recall changed for " + rec.pair_id);
      c.expect(score_micro(pred, g) == before.micro, "micro changed for " + rec.pair_id);
      ++checked;
    }
  }
  c.expect(checked > 0, "no exact predictions to perturb");
  return c.done(std::to_string(checked) + " perturbations, EM 1->0 with recall/micro unchanged");
}

// ---- JSON salvage corpus ----------------------------------------------------------------

struct SalvageCase {
  std::string text;
  Validity expect;
};

std::vector<SalvageCase> salvage_corpus() {
  // Twenty hand-labelled shapes, each instantiated five times with a
  // different path. Labels: 6 strict, 8 salvaged, 6 invalid shapes.
  const std::vector<std::pair<std::string, Validity>> shapes{
      {R"([{"question":"Q@?","relevant_file_paths":["@"]}])", Validity::strict},
      {R"([{"question":"Q@?","file":["@"]}])", Validity::strict},
      {"  \n[{\"question\": \"Q@?\", \"relevant_file_paths\": [\"@\"]}]\n", Validity::strict},
      {R"([{"question":"Q@?","relevant_file_paths":["@","x.py"]},{"question":"R?","relevant_file_paths":[]}])", Validity::strict},
      {R"([])", Validity::strict},
      {R"([{"question":"Q@? [draft]","relevant_file_paths":["@"]}])", Validity::strict},
      {"Sure! Here: [{\"question\":\"Q@?\",\"file\":[\"@\"]}]", Validity::salvaged},
      {"```json\n[{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}]\n```", Validity::salvaged},
      {"Answer:\n[{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}]\nHope this helps.", Validity::salvaged},
      {"See [notes] first. [{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}]", Validity::salvaged},
      {"[{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}] trailing words", Validity::salvaged},
      {"{\"items\": [{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}]}", Validity::salvaged},
      {"Two lists: [1,2] and [{\"question\":\"Q@?\",\"file\":[\"@\"]}].", Validity::salvaged},
      {"Output follows ]] [{\"question\":\"Q] @?\",\"relevant_file_paths\":[\"@\"]}]", Validity::salvaged},
      {"", Validity::invalid},
      {"I could not find any relevant files for @.", Validity::invalid},
      {"[{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}", Validity::invalid},
      {"{\"question\":\"Q@?\",\"relevant_file_paths\":[\"@\"]}", Validity::invalid},
      {"[\"@\", \"x.py\"]", Validity::invalid},
      {"[{'question': 'Q@?', 'relevant_file_paths': ['@']}]", Validity::invalid},
  };
  std::vector<SalvageCase> out;
  for (int v = 0; v < 5; ++v) {
    const std::string path = "pkg/mod" + std::to_string(v) + ".py";
    for (const auto& [shape, label] : shapes) {
      std::string text = shape;
      for (std::size_t at; (at = text.find('@')) != std::string::npos;) text.replace(at, 1, path);
      out.push_back({text, label});
    }
  }
  return out;
}

Outcome json_salvage() {
  Check c;
  auto corpus = salvage_corpus();
  c.expect(corpus.size() == 100, "corpus size " + std::to_string(corpus.size()));
  ValidityStats got;
  std::size_t superset_checks = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& cs = corpus[i];
    auto parsed = extract_items(cs.text);
    got.add(parsed.validity);
    c.expect(parsed.validity == cs.expect, "case " + std::to_string(i) + " parsed as " +
                                              std::string(to_string(parsed.validity)) + ": " + cs.text);
    if (parsed.validity == Validity::strict) {
      // Anything strict must also be recovered when buried in prose.
      auto wrapped = extract_items("Here is the list:\n" + cs.text + "\nDone.");
      c.expect(wrapped.validity == Validity::salvaged, "strict case " + std::to_string(i) + " not salvageable");
      c.expect(wrapped.items.size() == parsed.items.size(), "salvage lost items in case " + std::to_string(i));
      for (std::size_t k = 0; k < wrapped.items.size() && k < parsed.items.size(); ++k) {
        c.expect(wrapped.items[k].question == parsed.items[k].question &&
                     wrapped.items[k].paths == parsed.items[k].paths,
                 "salvage changed items in case " + std::to_string(i));
      }
      ++superset_checks;
    }
  }
  // Hand tally: 6, 8 and 6 shapes times five instances.
  c.expect(got.strict == 30 && got.salvaged == 40 && got.invalid == 30,
           "tally strict=" + std::to_string(got.strict) + " salvaged=" + std::to_string(got.salvaged) +
               " invalid=" + std::to_string(got.invalid));
  return c.done("strict=30 salvaged=40 invalid=30, " + std::to_string(superset_checks) + " strict cases re-salvaged");
}

// ---- BM25 -------------------------------------------------------------------------------

Outcome bm25_sanity() {
  Check c;
  std::vector<RepoPath> paths;
  std::vector<std::string> texts;
  for (int i = 0; i < 20; ++i) {
    paths.push_back(rp("src/module_" + std::to_string(10 + i) + ".py"));
    std::string t = "def handler(request):\n    return response\n";
    if (i == 13) t += "def quarantine_tokens():\n    pass\n";
    texts.push_back(t);
  }
  Bm25Index index(paths, texts);
  auto hits = index.rank("where are tokens quarantined quarantine", 3);
  c.expect(!hits.empty() && hits[0].path.str() == "src/module_23.py",
           "unique-token query ranked " + (hits.empty() ? std::string("nothing") : hits[0].path.str()) + " first");
  c.expect(hits.size() == 1, "non-matching files received positive scores");

  // Hand computation: N=2, df=2, idf=ln(1.2)=0.1823216; equal lengths so
  // the norm is 1. A: tf=3 -> 0.1823216*3*2.2/4.2 = 0.2865053.
  // B: tf=1 -> 0.1823216*1*2.2/2.2 = 0.1823216.
  Bm25Index two(rps({"a.py", "b.py"}), {"cache cache cache data", "cache data data data"});
  auto ranked = two.rank("cache", 2);
  c.expect(ranked.size() == 2 && ranked[0].path.str() == "a.py" && ranked[1].path.str() == "b.py", "A not above B");
  if (ranked.size() == 2) {
    c.expect(std::abs(ranked[0].score - 0.2865053) < 1e-6, "A score " + std::to_string(ranked[0].score));
    c.expect(std::abs(ranked[1].score - 0.1823216) < 1e-6, "B score " + std::to_string(ranked[1].score));
  }
  return c.done("sole file ranked first; A=0.286505 > B=0.182322");
}

}  // namespace

int main() {
  E2eState state;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", metric_oracle},
      {"worked micro-recall example", worked_example},
      {"derived aggregate example", aggregate_example},
      {"split sizes", split_sizes},
      {"path validation fuzz", path_fuzz},
      {"S6 partition property", s6_partition},
      {"dedup idempotence and order stability", dedup_idempotence},
      {"offline end-to-end", [&] { return offline_e2e(state); }},
      {"EM strictness", [&] { return em_strictness(state); }},
      {"JSON salvage corpus", json_salvage},
      {"BM25 sanity", bm25_sanity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome out;
    try {
      out = run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    std::cout << (out.ok ? "PASS " : "FAIL ") << name << ": " << out.detail << "\n";
    failed += !out.ok;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
