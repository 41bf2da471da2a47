#include "repoqa/qa_curation.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace repoqa {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool is_word(unsigned char c) { return std::isalnum(c) || c >= 0x80; }

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

std::string join_paths(const std::vector<RepoPath>& paths, char sep) {
  std::string out;
  for (const auto& p : paths) {
    if (!out.empty()) out += sep;
    out += p.str();
  }
  return out;
}

std::vector<RepoPath> paths_from_json(const json& arr) {
  std::vector<RepoPath> out;
  for (const auto& v : arr) {
    auto p = RepoPath::make(v.get<std::string>());
    if (!p) throw std::runtime_error("invalid path in dataset: " + v.get<std::string>());
    out.push_back(*p);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

json paths_to_json(const std::vector<RepoPath>& paths) {
  json arr = json::array();
  for (const auto& p : paths) arr.push_back(p.str());
  return arr;
}

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    bool blank = std::all_of(line.begin(), line.end(), [](char c) { return is_space(static_cast<unsigned char>(c)); });
    if (!blank) lines.emplace_back(line);
    start = end + 1;
  }
  return lines;
}

}  // namespace

// ---- pairs -------------------------------------------------------------------------

ordered_json QaPair::to_json() const {
  ordered_json j;
  j["id"] = id;
  j["question"] = question;
  j["answer_paths"] = paths_to_json(answer_paths);
  j["strategy"] = std::string(repoqa::to_string(strategy));
  j["task_id"] = task_id;
  return j;
}

QaPair QaPair::from_json(const json& doc) {
  QaPair p;
  p.id = doc.at("id").get<std::string>();
  p.question = doc.at("question").get<std::string>();
  p.answer_paths = paths_from_json(doc.at("answer_paths"));
  auto s = parse_strategy(doc.at("strategy").get<std::string>());
  if (!s) throw std::runtime_error("unknown strategy in dataset: " + doc.at("strategy").get<std::string>());
  p.strategy = *s;
  p.task_id = doc.value("task_id", std::string{});
  return p;
}

std::string make_pair_id(std::string_view question, const std::vector<RepoPath>& answers, StrategyId strategy) {
  std::string key(question);
  key += '\x1f';
  key += join_paths(answers, '\x1e');
  key += '\x1f';
  key += to_string(strategy);
  return to_hex(fnv1a64(key)) + to_hex(fnv1a64(key, 0x84222325cbf29ce4ULL));
}

std::string normalize_question(std::string_view question) {
  std::string out;
  bool pending_space = false;
  for (char ch : question) {
    if (is_space(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += ch;
  }
  return out;
}

// ---- validation --------------------------------------------------------------------

ValidationOutcome validate_item(const GeneratedItem& item, const GenerationTask& task, const RepoSnapshot& snapshot,
                                const ValidationPolicy& policy) {
  ValidationOutcome out;
  std::string question = normalize_question(item.question);
  if (question.empty()) {
    out.reason = "empty_question";
    return out;
  }

  std::vector<RepoPath> answers;
  for (const auto& raw : item.paths) {
    std::string reason;
    auto result = normalize_path(raw, snapshot);
    if (auto* np = std::get_if<NormalizedPath>(&result); np && np->member) {
      auto rp = RepoPath::make(np->text);
      if (rp && std::binary_search(task.manifest.begin(), task.manifest.end(), *rp)) {
        answers.push_back(*rp);
        continue;
      }
      reason = "outside_manifest";
    } else {
      reason = "unknown_path";
    }
    if (policy.paths == PathPolicy::strict) {
      out.reason = reason;
      return out;
    }
    ++out.dropped_paths;
  }
  std::sort(answers.begin(), answers.end());
  answers.erase(std::unique(answers.begin(), answers.end()), answers.end());

  if (answers.size() < task.min_paths || answers.size() > task.max_paths) {
    out.reason = "cardinality";
    return out;
  }
  if (answers.empty() && !policy.keep_empty_answers) {
    out.reason = "empty_answer";
    return out;
  }

  QaPair pair;
  pair.question = std::move(question);
  pair.answer_paths = std::move(answers);
  pair.strategy = task.strategy;
  pair.task_id = task.id;
  pair.id = make_pair_id(pair.question, pair.answer_paths, pair.strategy);
  out.pair = std::move(pair);
  return out;
}

std::uint64_t CurationReport::rejected_total() const noexcept {
  std::uint64_t n = 0;
  for (const auto& [_, c] : rejected_by_reason) n += c;
  return n;
}

ordered_json CurationReport::to_json() const {
  ordered_json j;
  j["items_in"] = items_in;
  j["accepted"] = accepted;
  ordered_json rej = ordered_json::object();
  for (const auto& [k, v] : rejected_by_reason) rej[k] = v;
  j["rejected_by_reason"] = rej;
  j["dropped_paths"] = dropped_paths;
  j["dedup_removed"] = dedup_removed;
  ordered_json bal = ordered_json::object();
  for (const auto& [k, v] : balance_removed_per_strategy) bal[k] = v;
  j["balance_removed_per_strategy"] = bal;
  j["orphan_completions"] = orphan_completions;
  j["final_pairs"] = final_pairs;
  j["validity"] = validity.to_json();
  return j;
}

// ---- dedup -------------------------------------------------------------------------

std::vector<std::string> question_tokens(std::string_view question) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char ch : question) {
    auto c = static_cast<unsigned char>(ch);
    if (is_word(c)) {
      cur += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch;
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

namespace {

std::vector<std::string> trigram_set(const std::vector<std::string>& tokens) {
  std::vector<std::string> grams;
  for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
    grams.push_back(tokens[i] + ' ' + tokens[i + 1] + ' ' + tokens[i + 2]);
  }
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

double jaccard_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t inter = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] == b[j]) {
      ++inter;
      ++i;
      ++j;
    } else if (a[i] < b[j]) {
      ++i;
    } else {
      ++j;
    }
  }
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct NearKey {
  std::vector<std::string> tokens;
  std::vector<std::string> grams;
};

double near_similarity(const NearKey& a, const NearKey& b) {
  if (a.grams.empty() || b.grams.empty()) return a.tokens == b.tokens ? 1.0 : 0.0;
  return jaccard_sorted(a.grams, b.grams);
}

}  // namespace

double trigram_jaccard(std::string_view a, std::string_view b) {
  NearKey ka{question_tokens(a), {}};
  NearKey kb{question_tokens(b), {}};
  ka.grams = trigram_set(ka.tokens);
  kb.grams = trigram_set(kb.tokens);
  return near_similarity(ka, kb);
}

std::vector<QaPair> dedup(const std::vector<QaPair>& pairs, const NearDupPolicy& policy, CurationReport* report) {
  std::vector<QaPair> kept;
  std::unordered_set<std::string> exact;
  // Near-duplicate candidates only ever share an answer set.
  std::unordered_map<std::string, std::vector<NearKey>> by_answers;
  for (const auto& p : pairs) {
    const std::string answers = join_paths(p.answer_paths, '\x1e');
    std::string key = ascii_lower(normalize_question(p.question)) + '\x1f' + answers;
    if (!exact.insert(std::move(key)).second) {
      if (report) ++report->dedup_removed;
      continue;
    }
    if (policy.enabled) {
      NearKey nk{question_tokens(p.question), {}};
      nk.grams = trigram_set(nk.tokens);
      auto& bucket = by_answers[answers];
      bool dup = std::any_of(bucket.begin(), bucket.end(),
                             [&](const NearKey& other) { return near_similarity(nk, other) >= policy.threshold; });
      if (dup) {
        if (report) ++report->dedup_removed;
        continue;
      }
      bucket.push_back(std::move(nk));
    }
    kept.push_back(p);
  }
  return kept;
}

// ---- balance -----------------------------------------------------------------------

std::uint64_t default_balance_cap(const std::map<StrategyId, std::uint64_t>& counts) {
  std::vector<std::uint64_t> v;
  for (const auto& [_, n] : counts) {
    if (n > 0) v.push_back(n);
  }
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  // floor(2 * median); for an even count the median is the mean of the middle pair.
  return v.size() % 2 == 1 ? 2 * v[m] : v[m - 1] + v[m];
}

std::vector<QaPair> balance(const std::vector<QaPair>& pairs, const BalanceConfig& cfg, CurationReport* report) {
  std::map<StrategyId, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (cfg.exclusions.count(pairs[i].strategy)) {
      if (report) ++report->balance_removed_per_strategy[std::string(to_string(pairs[i].strategy))];
      continue;
    }
    members[pairs[i].strategy].push_back(i);
  }
  std::map<StrategyId, std::uint64_t> counts;
  for (const auto& [s, idx] : members) counts[s] = idx.size();
  const std::uint64_t fallback = default_balance_cap(counts);

  std::vector<char> keep(pairs.size(), 0);
  for (auto& [s, idx] : members) {
    auto it = cfg.caps.find(s);
    const std::uint64_t cap = it != cfg.caps.end() ? it->second : fallback;
    if (idx.size() > cap) {
      std::mt19937_64 rng(cfg.seed ^ fnv1a64(to_string(s)));
      stable_shuffle(rng, idx);
      if (report) {
        report->balance_removed_per_strategy[std::string(to_string(s))] += idx.size() - cap;
      }
      idx.resize(cap);
    }
    for (auto i : idx) keep[i] = 1;
  }
  std::vector<QaPair> out;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (keep[i]) out.push_back(pairs[i]);
  }
  return out;
}

// ---- split -------------------------------------------------------------------------

std::string_view to_string(Side side) noexcept { return side == Side::train ? "train" : "test"; }

std::string cardinality_bucket(std::size_t answer_count) {
  return answer_count >= 3 ? "3+" : std::to_string(answer_count);
}

std::vector<QaPair> Dataset::side(Side s) const {
  std::vector<QaPair> out;
  for (const auto& p : pairs) {
    auto it = split.find(p.id);
    if (it != split.end() && it->second == s) out.push_back(p);
  }
  return out;
}

ordered_json Dataset::split_json() const {
  ordered_json j;
  j["seed"] = seed;
  j["ratio"] = ratio;
  ordered_json arr = ordered_json::array();
  for (const auto& p : pairs) {
    auto it = split.find(p.id);
    if (it == split.end()) continue;
    arr.push_back(ordered_json{{"id", p.id}, {"split", std::string(to_string(it->second))}});
  }
  j["assignments"] = arr;
  return j;
}

Dataset Dataset::from_parts(std::vector<QaPair> pairs, const json& split_doc) {
  Dataset d;
  d.pairs = std::move(pairs);
  d.seed = split_doc.value("seed", std::uint64_t{0});
  d.ratio = split_doc.value("ratio", 0.8);
  for (const auto& a : split_doc.at("assignments")) {
    const auto side = a.at("split").get<std::string>();
    if (side != "train" && side != "test") throw std::runtime_error("bad split side: " + side);
    d.split[a.at("id").get<std::string>()] = side == "train" ? Side::train : Side::test;
  }
  return d;
}

std::uint64_t train_size(std::uint64_t total, double ratio) {
  return static_cast<std::uint64_t>(std::floor(ratio * static_cast<double>(total) + 1e-9));
}

Dataset split_dataset(const std::vector<QaPair>& pairs, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split ratio must be in (0, 1)");
  {
    std::unordered_set<std::string> ids;
    for (const auto& p : pairs) {
      if (!ids.insert(p.id).second) throw std::invalid_argument("duplicate pair id: " + p.id);
    }
  }

  struct Stratum {
    std::vector<std::size_t> members;
    std::uint64_t train = 0;
    double remainder = 0.0;
    std::uint64_t size() const { return members.size(); }
    std::uint64_t test() const { return members.size() - train; }
  };
  std::map<std::string, Stratum> strata;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::string key = std::string(to_string(pairs[i].strategy)) + "|" + cardinality_bucket(pairs[i].answer_paths.size());
    strata[key].members.push_back(i);
  }

  const std::uint64_t target = train_size(pairs.size(), ratio);
  std::uint64_t assigned = 0;
  for (auto& [_, s] : strata) {
    const double quota = ratio * static_cast<double>(s.size());
    s.train = std::min<std::uint64_t>(s.size(), static_cast<std::uint64_t>(std::floor(quota + 1e-9)));
    s.remainder = quota - static_cast<double>(s.train);
    assigned += s.train;
  }
  // Largest remainder; ties go to the earlier stratum key.
  std::vector<Stratum*> order;
  for (auto& [_, s] : strata) order.push_back(&s);
  std::stable_sort(order.begin(), order.end(), [](const Stratum* a, const Stratum* b) { return a->remainder > b->remainder; });
  for (auto* s : order) {
    if (assigned >= target) break;
    if (s->train < s->size()) {
      ++s->train;
      ++assigned;
    }
  }

  // Every stratum with two or more pairs should land on both sides. Move one
  // slot between strata without breaking that for the other stratum.
  auto can_give_train = [](const Stratum& d) { return d.size() == 1 ? d.train == 1 : d.train >= 2; };
  auto can_give_test = [](const Stratum& d) { return d.size() == 1 ? d.test() == 1 : d.test() >= 2; };
  for (auto& [_, s] : strata) {
    if (s.size() < 2) continue;
    if (s.train == s.size()) {
      Stratum* donor = nullptr;
      for (auto& [__, d] : strata) {
        if (&d == &s || !can_give_test(d)) continue;
        if (!donor || d.test() > donor->test()) donor = &d;
      }
      if (donor) {
        --s.train;
        ++donor->train;
      }
    } else if (s.train == 0) {
      Stratum* donor = nullptr;
      for (auto& [__, d] : strata) {
        if (&d == &s || !can_give_train(d)) continue;
        if (!donor || d.train > donor->train) donor = &d;
      }
      if (donor) {
        ++s.train;
        --donor->train;
      }
    }
  }

  Dataset out;
  out.pairs = pairs;
  out.seed = seed;
  out.ratio = ratio;
  for (auto& [key, s] : strata) {
    auto members = s.members;
    // Order by id first so the assignment depends only on the pair set.
    std::sort(members.begin(), members.end(), [&](std::size_t a, std::size_t b) { return pairs[a].id < pairs[b].id; });
    std::mt19937_64 rng(seed ^ fnv1a64(key));
    stable_shuffle(rng, members);
    for (std::size_t k = 0; k < members.size(); ++k) {
      out.split[pairs[members[k]].id] = k < s.train ? Side::train : Side::test;
    }
  }
  return out;
}

// ---- export ------------------------------------------------------------------------

std::string export_training(const Dataset& dataset, Side side, const RepoSnapshot& snapshot, const ExportOptions& opts) {
  std::string out;
  for (const auto& p : dataset.side(side)) {
    auto prompt = render_inference_prompt(p.question, snapshot, opts.mode, opts.file_list_budget);
    ordered_json rec;
    rec["id"] = p.id;
    rec["strategy"] = std::string(to_string(p.strategy));
    ordered_json msgs = ordered_json::array();
    msgs.push_back(ordered_json{{"role", "system"}, {"content", prompt.system}});
    msgs.push_back(ordered_json{{"role", "user"}, {"content", prompt.user}});
    if (side == Side::train) {
      msgs.push_back(ordered_json{{"role", "assistant"}, {"content", paths_to_json(p.answer_paths).dump()}});
    }
    rec["messages"] = msgs;
    if (side == Side::test) rec["gold"] = paths_to_json(p.answer_paths);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<QaPair> import_export(std::string_view jsonl) {
  std::vector<QaPair> out;
  for (const auto& line : split_lines(jsonl)) {
    auto rec = json::parse(line);
    QaPair p;
    p.id = rec.at("id").get<std::string>();
    auto s = parse_strategy(rec.at("strategy").get<std::string>());
    if (!s) throw std::runtime_error("unknown strategy in export");
    p.strategy = *s;
    for (const auto& m : rec.at("messages")) {
      const auto role = m.at("role").get<std::string>();
      const auto content = m.at("content").get<std::string>();
      if (role == "user") {
        constexpr std::string_view prefix = "Question: ";
        auto q = std::string_view(content);
        if (q.substr(0, prefix.size()) == prefix) q.remove_prefix(prefix.size());
        p.question = std::string(q);
      } else if (role == "assistant") {
        p.answer_paths = paths_from_json(json::parse(content));
      }
    }
    if (rec.contains("gold")) p.answer_paths = paths_from_json(rec.at("gold"));
    out.push_back(std::move(p));
  }
  return out;
}

std::string pairs_to_jsonl(const std::vector<QaPair>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    out += p.to_json().dump();
    out += '\n';
  }
  return out;
}

std::vector<QaPair> pairs_from_jsonl(std::string_view jsonl) {
  std::vector<QaPair> out;
  for (const auto& line : split_lines(jsonl)) out.push_back(QaPair::from_json(json::parse(line)));
  return out;
}

// ---- pipeline ----------------------------------------------------------------------

CurationResult curate(const std::vector<GenerationTask>& tasks, const std::vector<RawCompletion>& completions,
                      const RepoSnapshot& snapshot, const CurationConfig& cfg) {
  CurationResult res;
  auto& rep = res.report;
  std::unordered_map<std::string, const GenerationTask*> by_id;
  for (const auto& t : tasks) by_id.emplace(t.id, &t);

  std::vector<QaPair> accepted;
  for (const auto& c : completions) {
    auto it = by_id.find(c.task_id);
    if (it == by_id.end()) {
      ++rep.orphan_completions;
      continue;
    }
    auto parsed = extract_items(c.text);
    rep.validity.add(parsed.validity);
    for (const auto& item : parsed.items) {
      ++rep.items_in;
      auto v = validate_item(item, *it->second, snapshot, cfg.validation);
      rep.dropped_paths += v.dropped_paths;
      if (v.pair) {
        ++rep.accepted;
        accepted.push_back(std::move(*v.pair));
      } else {
        ++rep.rejected_by_reason[v.reason];
      }
    }
  }
  auto unique = dedup(accepted, cfg.near_dup, &rep);
  res.pairs = balance(unique, cfg.balance, &rep);
  rep.final_pairs = res.pairs.size();
  return res;
}

}  // namespace repoqa
