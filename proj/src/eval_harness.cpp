#include "repoqa/eval_harness.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "repoqa/kernels.hpp"

namespace repoqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::vector<std::string> as_set(const std::vector<std::string>& v) {
  std::vector<std::string> s = v;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

std::size_t intersection_size(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t n = 0;
  for (auto ia = a.begin(), ib = b.begin(); ia != a.end() && ib != b.end();) {
    if (*ia == *ib) {
      ++n;
      ++ia;
      ++ib;
    } else if (*ia < *ib) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return n;
}

void require_gold(const std::vector<std::string>& gold) {
  if (gold.empty()) throw ScoringError("gold set is empty");
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

struct Tally {
  std::uint64_t q = 0;
  std::uint64_t em = 0;
  std::uint64_t recall = 0;
  double micro = 0.0;

  void add(const RecordScore& s) {
    ++q;
    em += static_cast<std::uint64_t>(s.em);
    recall += static_cast<std::uint64_t>(s.recall);
    micro += s.micro;
  }
  Metrics metrics() const {
    Metrics m;
    m.question_count = q;
    if (q == 0) return m;
    m.em = static_cast<double>(em) / static_cast<double>(q);
    m.recall = static_cast<double>(recall) / static_cast<double>(q);
    m.micro_avg_recall = micro / static_cast<double>(q);
    return m;
  }
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

int score_exact_match(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  require_gold(gold);
  return as_set(predicted) == as_set(gold) ? 1 : 0;
}

int score_recall(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  require_gold(gold);
  return intersection_size(as_set(predicted), as_set(gold)) >= 1 ? 1 : 0;
}

double score_micro(const std::vector<std::string>& predicted, const std::vector<std::string>& gold) {
  require_gold(gold);
  const auto g = as_set(gold);
  return static_cast<double>(intersection_size(as_set(predicted), g)) / static_cast<double>(g.size());
}

// ---- records -----------------------------------------------------------------------

ordered_json PredictionRecord::to_json() const {
  ordered_json j;
  j["pair_id"] = pair_id;
  j["raw_text"] = raw_text;
  j["predicted_paths"] = predicted_paths;
  j["parse_validity"] = std::string(to_string(parse_validity));
  j["member_count"] = member_count;
  return j;
}

PredictionRecord PredictionRecord::from_json(const json& doc) {
  PredictionRecord r;
  r.pair_id = doc.at("pair_id").get<std::string>();
  r.raw_text = doc.value("raw_text", std::string{});
  if (doc.contains("predicted_paths")) r.predicted_paths = as_set(doc.at("predicted_paths").get<std::vector<std::string>>());
  r.parse_validity = repoqa::parse_validity(doc.value("parse_validity", std::string("invalid")));
  r.member_count = doc.value("member_count", std::uint64_t{0});
  return r;
}

ordered_json Metrics::to_json() const {
  ordered_json j;
  j["question_count"] = question_count;
  j["em"] = em;
  j["recall"] = recall;
  j["micro_avg_recall"] = micro_avg_recall;
  return j;
}

Metrics Metrics::from_json(const json& doc) {
  Metrics m;
  m.question_count = doc.at("question_count").get<std::uint64_t>();
  m.em = doc.at("em").get<double>();
  m.recall = doc.at("recall").get<double>();
  m.micro_avg_recall = doc.at("micro_avg_recall").get<double>();
  return m;
}

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["question_count"] = question_count;
  j["em"] = em;
  j["recall"] = recall;
  j["micro_avg_recall"] = micro_avg_recall;
  j["validity_rate"] = validity_rate;
  ordered_json bs = ordered_json::object();
  for (const auto& [k, m] : by_strategy) bs[k] = m.to_json();
  j["by_strategy"] = bs;
  ordered_json bc = ordered_json::object();
  for (const auto& [k, m] : by_cardinality) bc[k] = m.to_json();
  j["by_cardinality"] = bc;
  return j;
}

EvalReport EvalReport::from_json(const json& doc) {
  EvalReport r;
  r.question_count = doc.at("question_count").get<std::uint64_t>();
  r.em = doc.at("em").get<double>();
  r.recall = doc.at("recall").get<double>();
  r.micro_avg_recall = doc.at("micro_avg_recall").get<double>();
  r.validity_rate = doc.at("validity_rate").get<double>();
  for (const auto& [k, v] : doc.at("by_strategy").items()) r.by_strategy[k] = Metrics::from_json(v);
  for (const auto& [k, v] : doc.at("by_cardinality").items()) r.by_cardinality[k] = Metrics::from_json(v);
  return r;
}

// ---- aggregate ---------------------------------------------------------------------

EvalReport aggregate(const std::vector<PredictionRecord>& records,
                     const std::map<std::string, std::vector<std::string>>& gold_map,
                     const std::map<std::string, StrategyId>& strategy_map, Execution exec) {
  // Fold in pair-id order so the sums do not depend on record order.
  std::vector<const PredictionRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->pair_id < b->pair_id; });

  std::vector<ScoreInput> inputs;
  inputs.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i > 0 && sorted[i]->pair_id == sorted[i - 1]->pair_id) {
      throw std::runtime_error("duplicate prediction for pair " + sorted[i]->pair_id);
    }
    auto it = gold_map.find(sorted[i]->pair_id);
    if (it == gold_map.end()) throw std::runtime_error("no gold answer for pair " + sorted[i]->pair_id);
    inputs.push_back({&sorted[i]->predicted_paths, &it->second});
  }
  const auto scores = score_records(inputs, exec);

  Tally all;
  std::map<std::string, Tally> by_strategy;
  std::map<std::string, Tally> by_card;
  std::uint64_t usable = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    all.add(scores[i]);
    if (sorted[i]->parse_validity != Validity::invalid) ++usable;
    auto s = strategy_map.find(sorted[i]->pair_id);
    by_strategy[s == strategy_map.end() ? std::string("unknown") : std::string(to_string(s->second))].add(scores[i]);
    by_card[cardinality_bucket(as_set(*inputs[i].gold).size())].add(scores[i]);
  }

  EvalReport rep;
  const auto m = all.metrics();
  rep.question_count = m.question_count;
  rep.em = m.em;
  rep.recall = m.recall;
  rep.micro_avg_recall = m.micro_avg_recall;
  rep.validity_rate = all.q == 0 ? 0.0 : static_cast<double>(usable) / static_cast<double>(all.q);
  for (const auto& [k, t] : by_strategy) rep.by_strategy[k] = t.metrics();
  for (const auto& [k, t] : by_card) rep.by_cardinality[k] = t.metrics();
  return rep;
}

EvalReport aggregate(const std::vector<PredictionRecord>& records, const std::vector<QaPair>& gold_pairs,
                     Execution exec) {
  std::map<std::string, std::vector<std::string>> gold;
  std::map<std::string, StrategyId> strategy;
  for (const auto& p : gold_pairs) {
    auto& g = gold[p.id];
    for (const auto& a : p.answer_paths) g.push_back(a.str());
    strategy[p.id] = p.strategy;
  }
  return aggregate(records, gold, strategy, exec);
}

// ---- predictors --------------------------------------------------------------------

std::string OraclePredictor::predict(const QaPair& pair) {
  json arr = json::array();
  for (const auto& p : pair.answer_paths) arr.push_back(p.str());
  return arr.dump();
}

std::string Bm25Predictor::predict(const QaPair& pair) {
  json arr = json::array();
  for (const auto& hit : index_.rank(pair.question, k_)) arr.push_back(hit.path.str());
  return arr.dump();
}

FilePredictor::FilePredictor(std::string_view jsonl) {
  for (const auto& line : split_lines(jsonl)) {
    auto doc = json::parse(line);
    raw_[doc.at("pair_id").get<std::string>()] = doc.at("raw_text").get<std::string>();
  }
}

std::string FilePredictor::predict(const QaPair& pair) {
  auto it = raw_.find(pair.id);
  if (it == raw_.end()) throw std::runtime_error("no prediction for pair " + pair.id);
  return it->second;
}

ChatPredictor::ChatPredictor(ChatBackend& backend, const RepoSnapshot& snapshot, ChatPredictorConfig cfg,
                             Sleeper sleeper)
    : backend_(backend), snapshot_(snapshot), cfg_(std::move(cfg)), sleeper_(std::move(sleeper)) {}

std::uint32_t ChatPredictor::max_concurrency() const {
  return backend_.single_flight() ? 1 : std::max<std::uint32_t>(1, cfg_.max_concurrency);
}

std::string ChatPredictor::predict(const QaPair& pair) {
  auto prompt = render_inference_prompt(pair.question, snapshot_, cfg_.mode, cfg_.file_list_budget);
  auto req = make_chat_request(prompt, cfg_.model_id, cfg_.temperature, cfg_.max_output_tokens);
  auto done = complete(req, backend_, cfg_.retry, pair.id, nullptr, sleeper_, fnv1a64(pair.id));
  if (!done.ok) throw std::runtime_error(done.error);
  return done.text;
}

PredictionRecord make_record(std::string pair_id, std::string raw_text, const RepoSnapshot& snapshot) {
  PredictionRecord r;
  r.pair_id = std::move(pair_id);
  r.raw_text = std::move(raw_text);
  auto parsed = extract_paths(r.raw_text);
  r.parse_validity = parsed.validity;
  if (parsed.validity == Validity::invalid) return r;
  for (const auto& raw : parsed.paths) {
    auto res = normalize_path(raw, snapshot);
    if (auto* np = std::get_if<NormalizedPath>(&res)) {
      r.predicted_paths.push_back(np->text);
    } else {
      auto first = raw.find_first_not_of(" \t\r\n");
      if (first == std::string::npos) continue;
      auto last = raw.find_last_not_of(" \t\r\n");
      r.predicted_paths.push_back(raw.substr(first, last - first + 1));
    }
  }
  r.predicted_paths = as_set(r.predicted_paths);
  r.member_count = static_cast<std::uint64_t>(std::count_if(
      r.predicted_paths.begin(), r.predicted_paths.end(), [&](const std::string& p) { return snapshot.contains(p); }));
  return r;
}

std::vector<PredictionRecord> run_predictor(const std::vector<QaPair>& pairs, Predictor& predictor,
                                            const RepoSnapshot& snapshot) {
  std::vector<PredictionRecord> out(pairs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= pairs.size()) return;
      std::string raw;
      bool failed = false;
      try {
        raw = predictor.predict(pairs[i]);
      } catch (const AuthError&) {
        std::lock_guard<std::mutex> lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop.store(true);
        return;
      } catch (const std::exception&) {
        failed = true;
      }
      if (failed) {
        out[i].pair_id = pairs[i].id;
        out[i].parse_validity = Validity::invalid;
      } else {
        out[i] = make_record(pairs[i].id, std::move(raw), snapshot);
      }
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(predictor.max_concurrency(), pairs.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return out;
}

std::string records_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.to_json().dump();
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> records_from_jsonl(std::string_view jsonl) {
  std::vector<PredictionRecord> out;
  for (const auto& line : split_lines(jsonl)) out.push_back(PredictionRecord::from_json(json::parse(line)));
  return out;
}

// ---- reports -----------------------------------------------------------------------

std::string render_markdown(const std::vector<ReportRow>& rows) {
  std::string md = "| Repo/Config | EM | Recall | Micro-Recall |\n|---|---|---|---|\n";
  for (const auto& row : rows) {
    md += "| " + row.label + " | " + fixed4(row.report.em) + " | " + fixed4(row.report.recall) + " | " +
          fixed4(row.report.micro_avg_recall) + " |\n";
  }
  if (rows.empty()) return md;

  auto breakdown = [&](const char* title, const std::map<std::string, Metrics>& m) {
    if (m.empty()) return;
    md += "\n### ";
    md += title;
    md += "\n\n| " + std::string(title) + " | Q | EM | Recall | Micro-Recall |\n|---|---|---|---|---|\n";
    for (const auto& [k, v] : m) {
      md += "| " + k + " | " + std::to_string(v.question_count) + " | " + fixed4(v.em) + " | " + fixed4(v.recall) +
            " | " + fixed4(v.micro_avg_recall) + " |\n";
    }
  };
  md += "\nQuestions: " + std::to_string(rows.front().report.question_count) +
        ", parse validity: " + fixed4(rows.front().report.validity_rate) + "\n";
  breakdown("Strategy", rows.front().report.by_strategy);
  breakdown("Gold size", rows.front().report.by_cardinality);
  return md;
}

}  // namespace repoqa
