#include "repoqa/strategy_engine.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace repoqa {

namespace assets {
extern const std::string_view generation_system;
extern const std::string_view s1_user;
extern const std::string_view s2_user;
extern const std::string_view s3_user;
extern const std::string_view s4_user;
extern const std::string_view s5_user;
extern const std::string_view s6_user;
extern const std::string_view inference_system;
extern const std::string_view inference_user;
}  // namespace assets

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::string_view kTruncationMarker = "... (truncated)\n";

std::uint64_t max_bytes(std::uint64_t budget) { return budget * 4; }

std::string task_id(StrategyId s, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%05zu", std::string(to_string(s)).c_str(), index);
  return buf;
}

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

// Longest prefix of `text` ending on a line boundary with at most `limit`
// bytes; falls back to a raw byte cut when the first line alone is too long.
std::string_view prefix_within(std::string_view text, std::size_t limit) {
  if (text.size() <= limit) return text;
  const auto nl = text.rfind('\n', limit == 0 ? 0 : limit - 1);
  if (nl != std::string_view::npos && nl + 1 <= limit) return text.substr(0, nl + 1);
  return text.substr(0, limit);
}

// Cuts `text` so that it plus the truncation marker fits in `limit` bytes.
std::string truncate_to(std::string_view text, std::size_t limit) {
  if (text.size() <= limit) return std::string(text);
  if (limit <= kTruncationMarker.size()) return std::string(text.substr(0, limit));
  std::string out(prefix_within(text, limit - kTruncationMarker.size()));
  if (!out.empty() && out.back() != '\n') out.push_back('\n');
  if (out.size() + kTruncationMarker.size() > limit) out.resize(limit - kTruncationMarker.size());
  out.append(kTruncationMarker);
  return out;
}

GenerationTask make_task(StrategyId s, std::size_t index, std::string context, std::vector<RepoPath> manifest,
                         std::vector<RepoPath> focus, std::uint32_t max_questions) {
  GenerationTask t;
  t.id = task_id(s, index);
  t.strategy = s;
  t.context = std::move(context);
  std::sort(manifest.begin(), manifest.end());
  manifest.erase(std::unique(manifest.begin(), manifest.end()), manifest.end());
  t.manifest = std::move(manifest);
  t.focus = std::move(focus);
  const auto bounds = path_bounds(s);
  t.min_paths = bounds.min_paths;
  t.max_paths = bounds.max_paths;
  t.max_questions = max_questions;
  return t;
}

void require(bool present, StrategyId s, const char* what) {
  if (!present) {
    throw ConfigError(std::string(to_string(s)) + " requires " + what + "; run the producing stage first");
  }
}

std::string joined_manifest(const std::vector<RepoPath>& paths) {
  std::string out = "MANIFEST:\n";
  for (const auto& p : paths) out += p.str() + "\n";
  return out;
}

// ---- S1 -------------------------------------------------------------------

std::vector<GenerationTask> build_s1(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  std::vector<GenerationTask> tasks;
  const auto all = in.snapshot->paths();
  const auto& files = in.snapshot->files();
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto& meta = files[i];
    const auto& content = in.contents->by_index[i];
    if (!content) {
      if (diag) diag->warn("S1: skipping unreadable " + meta.path.str());
      continue;
    }
    const std::string widest_header =
        "Current file: " + meta.path.str() + "\nPart 999999 of 999999\n\nCurrent file contents:\n";
    const auto overhead = estimate_tokens(widest_header);
    const auto chunk_budget = cfg.context_budget > overhead + 64 ? cfg.context_budget - overhead : 64;
    const auto chunks = chunk_file(meta, *content, chunk_budget);
    for (const auto& chunk : chunks) {
      std::string ctx = "Current file: " + meta.path.str() + "\n";
      if (chunks.size() > 1) {
        ctx += "Part " + std::to_string(chunk.part_index + 1) + " of " + std::to_string(chunks.size()) + "\n";
      }
      ctx += "\nCurrent file contents:\n";
      ctx += chunk.content;
      auto task = make_task(StrategyId::S1, tasks.size(), std::move(ctx), all, {meta.path}, cfg.max_qa_per_file);
      if (estimate_tokens(task.context) > cfg.context_budget) {
        task.truncated = true;
        if (diag) diag->warn("S1: " + task.id + " exceeds the context budget");
      }
      tasks.push_back(std::move(task));
    }
  }
  return tasks;
}

// ---- S2 -------------------------------------------------------------------

std::vector<GenerationTask> build_s2(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  auto ctx = in.l1->rendered;
  bool truncated = false;
  if (ctx.size() > max_bytes(cfg.context_budget)) {
    ctx = truncate_to(ctx, max_bytes(cfg.context_budget));
    truncated = true;
    if (diag) diag->warn("S2: repository structure truncated to the context budget");
  }
  auto all = in.snapshot->paths();
  auto task = make_task(StrategyId::S2, 0, std::move(ctx), all, all, cfg.num_questions);
  task.truncated = truncated;
  return {std::move(task)};
}

// ---- S3 -------------------------------------------------------------------

std::vector<GenerationTask> build_s3(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  const auto limit = max_bytes(cfg.context_budget);
  auto entity_lines = [&](const RepoPath& p) {
    auto it = in.l2->per_file.find(p);
    return it == in.l2->per_file.end() ? std::vector<std::string>{} : render_entity_lines(it->second);
  };
  auto render = [&](std::vector<RepoPath> paths) {
    std::sort(paths.begin(), paths.end());
    return render_tree(paths, entity_lines);
  };

  // Group by parent directory, directories in first-appearance (sorted) order.
  std::vector<std::vector<RepoPath>> groups;
  std::map<std::string, std::size_t> group_of;
  for (const auto& p : in.snapshot->paths()) {
    const std::string parent(p.parent());
    auto [it, inserted] = group_of.emplace(parent, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(p);
  }

  std::vector<GenerationTask> tasks;
  std::vector<RepoPath> window;
  auto flush = [&] {
    if (window.empty()) return;
    auto ctx = render(window);
    tasks.push_back(make_task(StrategyId::S3, tasks.size(), std::move(ctx), window, window, cfg.num_questions));
    window.clear();
  };
  auto fits_with = [&](const std::vector<RepoPath>& extra) {
    auto candidate = window;
    candidate.insert(candidate.end(), extra.begin(), extra.end());
    return render(std::move(candidate)).size() <= limit;
  };

  for (const auto& group : groups) {
    if (fits_with(group)) {
      window.insert(window.end(), group.begin(), group.end());
      continue;
    }
    flush();
    if (fits_with(group)) {
      window = group;
      continue;
    }
    // Directory too large for one window: fall back to file boundaries.
    for (const auto& path : group) {
      if (fits_with({path})) {
        window.push_back(path);
        continue;
      }
      flush();
      if (fits_with({path})) {
        window.push_back(path);
        continue;
      }
      auto ctx = truncate_to(render({path}), limit);
      auto task = make_task(StrategyId::S3, tasks.size(), std::move(ctx), {path}, {path}, cfg.num_questions);
      task.truncated = true;
      if (diag) diag->warn("S3: entity listing of " + path.str() + " truncated to the context budget");
      tasks.push_back(std::move(task));
    }
  }
  flush();
  return tasks;
}

// ---- S4 -------------------------------------------------------------------

struct SummaryPart {
  RepoPath path;
  std::string text;
};

std::vector<GenerationTask> build_s4(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  const auto limit = max_bytes(cfg.context_budget);
  const std::string fixed_head = "MANIFEST:\n";
  const std::string summary_head = "\nSUMMARY:\n";
  const auto fixed = fixed_head.size() + summary_head.size();

  std::vector<SummaryPart> parts;
  for (const auto& path : in.snapshot->paths()) {
    auto it = in.l3->per_file.find(path);
    const FileSummary empty;
    auto block = render_file_summary(path, it == in.l3->per_file.end() ? empty : it->second);
    const auto manifest_line = path.str().size() + 1;
    if (fixed + manifest_line + block.size() <= limit) {
      parts.push_back({path, std::move(block)});
      continue;
    }
    // Split the block's body lines into numbered parts.
    const auto body = std::string_view(block).substr(block.find('\n') + 1);
    std::size_t pos = 0;
    int part_no = 1;
    while (pos < body.size()) {
      const std::string head = "FILE: " + path.str() + " (part " + std::to_string(part_no) + ")\n";
      if (fixed + manifest_line + head.size() >= limit) {
        throw ConfigError("context_budget too small for S4 summaries of " + path.str());
      }
      const auto room = limit - fixed - manifest_line - head.size();
      auto piece = prefix_within(body.substr(pos), room);
      if (piece.empty()) piece = body.substr(pos, room);
      parts.push_back({path, head + std::string(piece)});
      pos += piece.size();
      ++part_no;
    }
    if (diag) diag->warn("S4: summary of " + path.str() + " split into " + std::to_string(part_no - 1) + " parts");
  }

  std::vector<GenerationTask> tasks;
  std::vector<RepoPath> manifest;
  std::string summary;
  std::size_t size = fixed;
  auto flush = [&] {
    if (manifest.empty()) return;
    auto ctx = joined_manifest(manifest) + summary_head + summary;
    tasks.push_back(make_task(StrategyId::S4, tasks.size(), std::move(ctx), manifest, manifest, cfg.q_per_batch));
    manifest.clear();
    summary.clear();
    size = fixed;
  };
  for (auto& part : parts) {
    const bool new_path = manifest.empty() || !(manifest.back() == part.path);
    const auto added = part.text.size() + (new_path ? part.path.str().size() + 1 : 0);
    // Parts were sized to fit an empty batch, so a flush always makes room.
    if (size + added > limit) flush();
    const bool fresh = manifest.empty() || !(manifest.back() == part.path);
    if (fresh) {
      manifest.push_back(part.path);
      size += part.path.str().size() + 1;
    }
    summary += part.text;
    size += part.text.size();
  }
  flush();
  return tasks;
}

// ---- S5 -------------------------------------------------------------------

std::vector<GenerationTask> build_s5(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  const auto limit = max_bytes(cfg.context_budget);
  const auto all = in.snapshot->paths();
  const std::string tree_head = "Repository structure:\n";
  const std::string file_head = "\nFile summary:\n";
  std::vector<GenerationTask> tasks;
  for (const auto& path : all) {
    auto it = in.l3->per_file.find(path);
    const FileSummary empty;
    auto summary = render_file_summary(path, it == in.l3->per_file.end() ? empty : it->second);
    std::string tree = in.l1->rendered;
    bool truncated = false;
    const auto fixed = tree_head.size() + file_head.size();
    if (fixed + tree.size() + summary.size() > limit) {
      truncated = true;
      // The summary keeps at least half the room; the tree takes the rest.
      const auto room = limit - fixed;
      const auto summary_cap = std::max<std::size_t>(room / 2, room > tree.size() ? room - tree.size() : 0);
      if (summary.size() > summary_cap) summary = truncate_to(summary, summary_cap);
      tree = truncate_to(tree, room - summary.size());
    }
    auto ctx = tree_head + tree + file_head + summary;
    auto task = make_task(StrategyId::S5, tasks.size(), std::move(ctx), all, {path}, cfg.max_qa_per_file);
    task.truncated = truncated;
    if (truncated && diag) diag->warn("S5: context for " + path.str() + " truncated to the context budget");
    tasks.push_back(std::move(task));
  }
  return tasks;
}

// ---- S6 -------------------------------------------------------------------

std::vector<GenerationTask> build_s6(const StrategyInputs& in, const GenConfig& cfg, Diagnostics* diag) {
  const auto limit = max_bytes(cfg.context_budget);
  const std::string files_head = "\nFILES:\n";
  const auto& files = in.snapshot->files();

  auto block_for = [&](std::size_t i) {
    std::string block = "=== FILE: " + files[i].path.str() + " ===\n";
    const auto& content = in.contents->by_index[i];
    if (!content) {
      block += "(unreadable)\n";
    } else {
      block += *content;
      if (!content->empty() && content->back() != '\n') block.push_back('\n');
    }
    return block;
  };
  // Context bytes of one file inside a batch: its manifest line plus its block.
  std::vector<std::size_t> cost(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!in.contents->by_index[i] && diag) diag->warn("S6: " + files[i].path.str() + " is unreadable");
    cost[i] = files[i].path.str().size() + 1 + block_for(i).size();
  }
  const std::size_t fixed = std::string_view("MANIFEST:\n").size() + files_head.size();
  auto fits = [&](std::size_t bytes) { return fixed + bytes <= limit; };

  // Greedy fill in path order; a file that cannot fit even alone is its own
  // (truncated) batch.
  struct Batch {
    std::vector<std::size_t> idx;
    std::size_t bytes = 0;
    bool oversize = false;
  };
  std::vector<Batch> batches;
  Batch cur;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (cur.idx.size() < cfg.s6_max_files && fits(cur.bytes + cost[i])) {
      cur.idx.push_back(i);
      cur.bytes += cost[i];
      continue;
    }
    if (!cur.idx.empty()) batches.push_back(std::move(cur));
    cur = Batch{};
    if (fits(cost[i])) {
      cur.idx.push_back(i);
      cur.bytes = cost[i];
    } else {
      batches.push_back(Batch{{i}, cost[i], true});
    }
  }
  if (!cur.idx.empty()) batches.push_back(std::move(cur));

  // A short final batch borrows trailing files from its predecessor while
  // both stay within the budget and the predecessor keeps the minimum.
  if (batches.size() >= 2) {
    auto& last = batches.back();
    auto& prev = batches[batches.size() - 2];
    while (!last.oversize && !prev.oversize && last.idx.size() < cfg.s6_min_files &&
           prev.idx.size() > cfg.s6_min_files) {
      const auto moved = prev.idx.back();
      if (!fits(last.bytes + cost[moved])) break;
      prev.idx.pop_back();
      prev.bytes -= cost[moved];
      last.idx.insert(last.idx.begin(), moved);
      last.bytes += cost[moved];
    }
  }

  std::vector<GenerationTask> tasks;
  for (const auto& b : batches) {
    std::vector<RepoPath> manifest;
    for (auto i : b.idx) manifest.push_back(files[i].path);
    if (b.oversize) {
      const auto& path = files[b.idx.front()].path;
      const auto room = limit - std::min<std::uint64_t>(limit, fixed + path.str().size() + 1);
      auto ctx = joined_manifest(manifest) + files_head + truncate_to(block_for(b.idx.front()), room);
      auto task = make_task(StrategyId::S6, tasks.size(), std::move(ctx), manifest, manifest, cfg.q_per_batch);
      task.truncated = true;
      if (diag) diag->warn("S6: " + path.str() + " exceeds the context budget; content truncated");
      tasks.push_back(std::move(task));
      continue;
    }
    std::string body;
    for (auto i : b.idx) body += block_for(i);
    auto ctx = joined_manifest(manifest) + files_head + body;
    tasks.push_back(make_task(StrategyId::S6, tasks.size(), std::move(ctx), manifest, manifest, cfg.q_per_batch));
  }
  return tasks;
}

// ---- inference listing ------------------------------------------------------

std::size_t dir_depth(std::string_view path) { return static_cast<std::size_t>(std::count(path.begin(), path.end(), '/')); }

std::string listing_at_depth(const std::vector<RepoPath>& paths, std::size_t keep) {
  std::string out;
  std::size_t i = 0;
  while (i < paths.size()) {
    const auto& p = paths[i].str();
    if (dir_depth(p) <= keep) {
      out += p + "\n";
      ++i;
      continue;
    }
    // Prefix made of the first `keep` directories plus the next one.
    std::size_t cut = 0;
    for (std::size_t d = 0; d <= keep; ++d) cut = p.find('/', cut == 0 && d == 0 ? 0 : cut + 1);
    const auto prefix = p.substr(0, cut + 1);
    std::size_t n = 0;
    while (i < paths.size() && paths[i].str().compare(0, prefix.size(), prefix) == 0) {
      ++n;
      ++i;
    }
    out += prefix + " (" + std::to_string(n) + " files)\n";
  }
  return out;
}

}  // namespace

void GenConfig::validate() const {
  if (max_qa_per_file == 0 || num_questions == 0 || q_per_batch == 0 || context_budget == 0) {
    throw ConfigError("generation counts and context_budget must be at least 1");
  }
  if (s6_min_files < 1 || s6_max_files > 64 || s6_min_files > s6_max_files) {
    throw ConfigError("s6 batch range must satisfy 1 <= min <= max <= 64");
  }
  if (context_budget < 128) throw ConfigError("context_budget must be at least 128 tokens");
}

PathBounds path_bounds(StrategyId strategy) noexcept {
  switch (strategy) {
    case StrategyId::S1: return {1, 3};
    case StrategyId::S4: return {1, 4};
    case StrategyId::S6: return {1, 4};
    case StrategyId::S2:
    case StrategyId::S3:
    case StrategyId::S5: return {0, 4};
  }
  return {0, 4};
}

std::vector<GenerationTask> build_tasks(const StrategyInputs& inputs, StrategyId strategy, const GenConfig& cfg,
                                        Diagnostics* diag) {
  cfg.validate();
  require(inputs.snapshot != nullptr, strategy, "a repository snapshot");
  switch (strategy) {
    case StrategyId::S1:
      require(inputs.contents != nullptr, strategy, "file contents");
      return build_s1(inputs, cfg, diag);
    case StrategyId::S2:
      require(inputs.l1 != nullptr, strategy, "the L1 structure summary");
      return build_s2(inputs, cfg, diag);
    case StrategyId::S3:
      require(inputs.l1 != nullptr, strategy, "the L1 structure summary");
      require(inputs.l2 != nullptr, strategy, "the L2 entity index");
      return build_s3(inputs, cfg, diag);
    case StrategyId::S4:
      require(inputs.l3 != nullptr, strategy, "the L3 fine summary");
      return build_s4(inputs, cfg, diag);
    case StrategyId::S5:
      require(inputs.l1 != nullptr, strategy, "the L1 structure summary");
      require(inputs.l3 != nullptr, strategy, "the L3 fine summary");
      return build_s5(inputs, cfg, diag);
    case StrategyId::S6:
      require(inputs.contents != nullptr, strategy, "file contents");
      return build_s6(inputs, cfg, diag);
  }
  return {};
}

PromptBundle render_prompt(const GenerationTask& task, const GenConfig& cfg) {
  std::string_view tmpl;
  switch (task.strategy) {
    case StrategyId::S1: tmpl = assets::s1_user; break;
    case StrategyId::S2: tmpl = assets::s2_user; break;
    case StrategyId::S3: tmpl = assets::s3_user; break;
    case StrategyId::S4: tmpl = assets::s4_user; break;
    case StrategyId::S5: tmpl = assets::s5_user; break;
    case StrategyId::S6: tmpl = assets::s6_user; break;
  }
  std::string user(tmpl);
  replace_all(user, "{MAX_QA_PER_FILE}", std::to_string(cfg.max_qa_per_file));
  replace_all(user, "{num_questions}", std::to_string(cfg.num_questions));
  replace_all(user, "{q_per_batch}", std::to_string(cfg.q_per_batch));
  // Context goes in last so text inside it is never treated as a placeholder.
  const auto at = user.rfind("{CONTEXT}");
  if (at != std::string::npos) user.replace(at, std::string_view("{CONTEXT}").size(), task.context);
  return {std::string(assets::generation_system), std::move(user)};
}

std::string_view to_string(InferenceMode mode) noexcept {
  return mode == InferenceMode::with_file_list ? "with_file_list" : "question_only";
}

InferenceMode parse_inference_mode(std::string_view text) {
  if (text == "question_only") return InferenceMode::question_only;
  if (text == "with_file_list") return InferenceMode::with_file_list;
  throw ConfigError("unknown prompt mode '" + std::string(text) + "' (question_only | with_file_list)");
}

std::string_view inference_system_text() noexcept { return assets::inference_system; }

std::string render_file_listing(const std::vector<RepoPath>& paths, std::uint64_t budget) {
  std::string full;
  for (const auto& p : paths) full += p.str() + "\n";
  if (estimate_tokens(full) <= budget) return full;
  std::size_t deepest = 0;
  for (const auto& p : paths) deepest = std::max(deepest, dir_depth(p.view()));
  for (std::size_t keep = deepest; keep-- > 0;) {
    auto listing = listing_at_depth(paths, keep);
    if (estimate_tokens(listing) <= budget) return listing;
  }
  // Even top-level grouping is too long: hard cut with a count of the rest.
  auto listing = listing_at_depth(paths, 0);
  const auto limit = max_bytes(budget);
  std::string out;
  std::size_t pos = 0;
  std::size_t shown = 0;
  std::size_t total = static_cast<std::size_t>(std::count(listing.begin(), listing.end(), '\n'));
  while (pos < listing.size()) {
    const auto nl = listing.find('\n', pos);
    const auto line = listing.substr(pos, nl - pos + 1);
    const auto tail = "... (" + std::to_string(total - shown - 1) + " more)\n";
    if (out.size() + line.size() + tail.size() > limit) break;
    out += line;
    ++shown;
    pos = nl + 1;
  }
  if (shown < total) out += "... (" + std::to_string(total - shown) + " more)\n";
  return out;
}

PromptBundle render_inference_prompt(std::string_view question, const RepoSnapshot& snapshot, InferenceMode mode,
                                     std::uint64_t file_list_budget) {
  if (question.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw std::invalid_argument("inference question must be nonempty");
  }
  std::string system(assets::inference_system);
  if (mode == InferenceMode::with_file_list) {
    system += "\n\nRepository files:\n";
    system += render_file_listing(snapshot.paths(), file_list_budget);
  }
  std::string user(assets::inference_user);
  const auto at = user.find("{question_text}");
  if (at != std::string::npos) user.replace(at, std::string_view("{question_text}").size(), question);
  return {std::move(system), std::move(user)};
}

nlohmann::ordered_json GenerationTask::to_json() const {
  ojson j;
  j["id"] = id;
  j["strategy"] = std::string(to_string(strategy));
  j["context"] = context;
  auto m = ojson::array();
  for (const auto& p : manifest) m.push_back(p.str());
  j["manifest"] = std::move(m);
  j["min_paths"] = min_paths;
  j["max_paths"] = max_paths;
  j["max_questions"] = max_questions;
  auto f = ojson::array();
  for (const auto& p : focus) f.push_back(p.str());
  j["focus"] = std::move(f);
  j["truncated"] = truncated;
  return j;
}

GenerationTask GenerationTask::from_json(const nlohmann::json& doc) {
  GenerationTask t;
  t.id = doc.at("id").get<std::string>();
  const auto strategy = parse_strategy(doc.at("strategy").get<std::string>());
  if (!strategy) throw std::invalid_argument("unknown strategy in task " + t.id);
  t.strategy = *strategy;
  t.context = doc.at("context").get<std::string>();
  auto to_paths = [&](const nlohmann::json& arr) {
    std::vector<RepoPath> out;
    for (const auto& s : arr) {
      auto p = RepoPath::make(s.get<std::string>());
      if (!p) throw std::invalid_argument("invalid manifest path in task " + t.id);
      out.push_back(*p);
    }
    return out;
  };
  t.manifest = to_paths(doc.at("manifest"));
  t.focus = doc.contains("focus") ? to_paths(doc.at("focus")) : t.manifest;
  t.min_paths = doc.at("min_paths").get<std::uint32_t>();
  t.max_paths = doc.at("max_paths").get<std::uint32_t>();
  t.max_questions = doc.at("max_questions").get<std::uint32_t>();
  t.truncated = doc.value("truncated", false);
  return t;
}

}  // namespace repoqa
