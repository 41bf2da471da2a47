#include "repoqa/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "repoqa/bm25.hpp"

namespace repoqa {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string one(const CLI::ConfigItem& item) {
  if (item.inputs.size() != 1) throw ConfigError("expected one value for " + item.fullname());
  return item.inputs.front();
}

std::uint64_t as_u64(const CLI::ConfigItem& item) {
  const auto text = one(item);
  std::uint64_t v = 0;
  if (!CLI::detail::lexical_cast(text, v)) throw ConfigError("not a non-negative integer: " + item.fullname() + " = " + text);
  return v;
}

std::uint32_t as_u32(const CLI::ConfigItem& item) {
  const auto v = as_u64(item);
  if (v > 0xffffffffULL) throw ConfigError("value too large: " + item.fullname());
  return static_cast<std::uint32_t>(v);
}

double as_double(const CLI::ConfigItem& item) {
  const auto text = one(item);
  double v = 0;
  if (!CLI::detail::lexical_cast(text, v)) throw ConfigError("not a number: " + item.fullname() + " = " + text);
  return v;
}

bool as_bool(const CLI::ConfigItem& item) {
  const auto text = one(item);
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("not a boolean: " + item.fullname() + " = " + text);
}

StrategyId as_strategy(const std::string& text) {
  auto s = parse_strategy(text);
  if (!s) throw ConfigError("unknown strategy: " + text);
  return *s;
}

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  return p.is_absolute() ? p : (base / p).lexically_normal();
}

std::vector<std::string> jsonl_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::string require(const fs::path& file, const std::string& producer) {
  if (!fs::exists(file)) throw MissingArtifact(file, producer);
  return read_text(file);
}

RepoSnapshot load_snapshot(const Workspace& ws) { return RepoSnapshot::from_json(json::parse(require(ws.snapshot(), "scan"))); }

RepoContents load_contents(const PipelineConfig& cfg, const RepoSnapshot& snap, std::ostream& log) {
  if (cfg.repo_root.empty()) throw ConfigError("repo.root is not set");
  Diagnostics diag;
  auto contents = RepoContents::load(cfg.repo_root, snap, &diag);
  for (const auto& w : diag.warnings) log << "warning: " << w << "\n";
  return contents;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace

// ---- config ------------------------------------------------------------------------

PipelineConfig PipelineConfig::load(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  auto base = file.parent_path();
  if (base.empty()) base = ".";
  return parse(in, base);
}

PipelineConfig PipelineConfig::parse(std::istream& in, const fs::path& base_dir) {
  PipelineConfig cfg;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigTOML().from_config(in);
  } catch (const CLI::Error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  bool scan_ext_set = false;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") continue;
    const std::string section = item.parents.empty() ? std::string() : item.parents.front();
    const std::string sub = item.parents.size() > 1 ? item.parents[1] : std::string();
    const std::string& key = item.name;

    if (section == "repo" && key == "root") {
      cfg.repo_root = resolve(base_dir, one(item));
    } else if (section == "scan" && key == "extensions") {
      if (!scan_ext_set) cfg.scan.extensions.clear();
      scan_ext_set = true;
      for (const auto& e : item.inputs) cfg.scan.extensions.insert(e.empty() || e[0] == '.' ? e : "." + e);
    } else if (section == "scan" && key == "ignored_dirs") {
      cfg.scan.ignored_dirs = {item.inputs.begin(), item.inputs.end()};
    } else if (section == "generation") {
      if (key == "max_qa_per_file") cfg.gen.max_qa_per_file = as_u32(item);
      else if (key == "num_questions") cfg.gen.num_questions = as_u32(item);
      else if (key == "q_per_batch") cfg.gen.q_per_batch = as_u32(item);
      else if (key == "s6_min_files") cfg.gen.s6_min_files = as_u32(item);
      else if (key == "s6_max_files") cfg.gen.s6_max_files = as_u32(item);
      else if (key == "context_budget") cfg.gen.context_budget = as_u64(item);
      else if (key == "seed") cfg.gen.seed = as_u64(item);
      else if (key == "l2_method_names") cfg.summary.l2_method_names = as_bool(item);
      else if (key == "strategies") {
        cfg.strategies.clear();
        for (const auto& s : item.inputs) cfg.strategies.push_back(as_strategy(s));
      } else throw ConfigError("unknown key " + item.fullname());
    } else if (section == "backend") {
      if (key == "kind") cfg.backend.kind = one(item);
      else if (key == "endpoint") cfg.backend.endpoint = one(item);
      else if (key == "model") cfg.backend.model = one(item);
      else if (key == "api_key_env") cfg.backend.api_key_env = one(item);
      else if (key == "temperature") cfg.backend.temperature = as_double(item);
      else if (key == "max_output_tokens") cfg.backend.max_output_tokens = as_u32(item);
      else if (key == "max_concurrency") cfg.backend.max_concurrency = as_u32(item);
      else if (key == "max_attempts") cfg.backend.max_attempts = as_u32(item);
      else if (key == "base_delay_ms") cfg.backend.base_delay_ms = as_u64(item);
      else if (key == "timeout_s") cfg.backend.timeout_s = as_u64(item);
      else throw ConfigError("unknown key " + item.fullname());
    } else if (section == "curation" && sub == "caps") {
      cfg.curation.balance.caps[as_strategy(key)] = as_u64(item);
    } else if (section == "curation" && sub.empty()) {
      if (key == "path_policy") {
        const auto v = one(item);
        if (v == "strict") cfg.curation.validation.paths = PathPolicy::strict;
        else if (v == "repair") cfg.curation.validation.paths = PathPolicy::repair;
        else throw ConfigError("curation.path_policy must be strict or repair");
      } else if (key == "keep_empty_answers") cfg.curation.validation.keep_empty_answers = as_bool(item);
      else if (key == "near_dup") cfg.curation.near_dup.enabled = as_bool(item);
      else if (key == "near_dup_threshold") cfg.curation.near_dup.threshold = as_double(item);
      else if (key == "seed") cfg.curation.balance.seed = as_u64(item);
      else if (key == "exclusions") {
        cfg.curation.balance.exclusions.clear();
        for (const auto& s : item.inputs) cfg.curation.balance.exclusions.insert(as_strategy(s));
      } else throw ConfigError("unknown key " + item.fullname());
    } else if (section == "split") {
      if (key == "ratio") cfg.split_ratio = as_double(item);
      else if (key == "seed") cfg.split_seed = as_u64(item);
      else throw ConfigError("unknown key " + item.fullname());
    } else if (section == "eval") {
      if (key == "mode") {
        try {
          cfg.eval.mode = parse_inference_mode(one(item));
        } catch (const std::exception& e) {
          throw ConfigError(e.what());
        }
      } else if (key == "predictor") cfg.eval.predictor = one(item);
      else if (key == "k") cfg.eval.k = as_u32(item);
      else if (key == "predictions_file") cfg.eval.predictions_file = resolve(base_dir, one(item));
      else if (key == "label") cfg.eval.label = one(item);
      else if (key == "model") cfg.eval.model = one(item);
      else if (key == "file_list_budget") cfg.eval.file_list_budget = as_u64(item);
      else throw ConfigError("unknown key " + item.fullname());
    } else if (section == "workspace" && key == "dir") {
      cfg.workspace = resolve(base_dir, one(item));
    } else {
      throw ConfigError("unknown key " + item.fullname());
    }
  }
  if (!cfg.repo_root.empty() && !fs::is_directory(cfg.repo_root)) {
    throw ConfigError("repo.root is not a directory: " + cfg.repo_root.string());
  }
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  gen.validate();
  if (strategies.empty()) throw ConfigError("no strategies selected");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split.ratio must be in (0, 1)");
  if (!(curation.near_dup.threshold > 0.0 && curation.near_dup.threshold <= 1.0)) {
    throw ConfigError("curation.near_dup_threshold must be in (0, 1]");
  }
  if (backend.kind != "scripted" && backend.kind != "http") throw ConfigError("backend.kind must be scripted or http");
  if (backend.kind == "http" && backend.endpoint.empty()) throw ConfigError("backend.endpoint is required for http");
  if (backend.max_attempts == 0) throw ConfigError("backend.max_attempts must be at least 1");
  if (backend.temperature < 0.0) throw ConfigError("backend.temperature must be non-negative");
  static const std::vector<std::string> predictors{"oracle", "empty", "bm25", "chat", "file"};
  if (std::find(predictors.begin(), predictors.end(), eval.predictor) == predictors.end()) {
    throw ConfigError("eval.predictor must be one of oracle, empty, bm25, chat, file");
  }
  if (eval.k == 0) throw ConfigError("eval.k must be at least 1");
}

MissingArtifact::MissingArtifact(const fs::path& file, const std::string& producer)
    : std::runtime_error("missing " + file.string() + "; run `repoqa " + producer + "` first") {}

std::string read_text(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& file, std::string_view text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

std::unique_ptr<ChatBackend> make_backend(const BackendSettings& settings) {
  if (settings.kind == "scripted") return std::make_unique<ScriptedBackend>();
  const char* key = std::getenv(settings.api_key_env.c_str());
  if (!key || !*key) throw ConfigError("environment variable " + settings.api_key_env + " is not set");
  return std::make_unique<HttpBackend>(settings.endpoint, key, std::chrono::seconds(settings.timeout_s));
}

// ---- stages ------------------------------------------------------------------------

std::string run_scan(const PipelineConfig& cfg, std::ostream& log) {
  if (cfg.repo_root.empty()) throw ConfigError("repo.root is not set");
  Workspace ws{cfg.workspace};
  Diagnostics diag;
  auto snap = scan_repository(cfg.repo_root, cfg.scan, &diag);
  for (const auto& w : diag.warnings) log << "warning: " << w << "\n";
  write_text(ws.snapshot(), snap.to_json().dump(2) + "\n");
  return "scan: " + std::to_string(snap.total_files_seen()) + " files seen, " + std::to_string(snap.code_files_used()) +
         " code files in " + snap.label();
}

std::string run_summarize(const PipelineConfig& cfg, std::ostream& log, Execution exec) {
  Workspace ws{cfg.workspace};
  auto snap = load_snapshot(ws);
  auto contents = load_contents(cfg, snap, log);
  Diagnostics diag;
  auto l1 = summarize_l1(snap);
  auto l2 = summarize_l2(snap, contents, default_parser_factory(), cfg.summary, &diag, exec);
  auto l3 = summarize_l3(snap, contents, default_parser_factory(), nullptr, exec);
  for (const auto& w : diag.warnings) log << "warning: " << w << "\n";

  ordered_json l1j;
  l1j["rendered"] = l1.rendered;
  json entries = json::array();
  for (const auto& p : l1.entries) entries.push_back(p.str());
  l1j["entries"] = entries;
  write_text(ws.l1_text(), l1.rendered);
  write_text(ws.l1(), l1j.dump(2) + "\n");
  write_text(ws.l2(), l2.to_json().dump(2) + "\n");
  write_text(ws.l3(), l3.to_json().dump(2) + "\n");
  return "summarize: " + std::to_string(l1.entries.size()) + " files, " + std::to_string(l2.per_file.size()) +
         " parsed, " + std::to_string(diag.warnings.size()) + " warnings";
}

std::string run_gen(const PipelineConfig& cfg, std::ostream& log, ChatBackend* backend, const Sleeper& sleeper) {
  Workspace ws{cfg.workspace};
  auto snap = load_snapshot(ws);
  const auto l1j = json::parse(require(ws.l1(), "summarize"));
  StructureTree l1;
  l1.rendered = l1j.at("rendered").get<std::string>();
  for (const auto& e : l1j.at("entries")) {
    auto p = RepoPath::make(e.get<std::string>());
    if (!p) throw std::runtime_error("bad path in " + ws.l1().string());
    l1.entries.push_back(*p);
  }
  auto l2 = EntityIndex::from_json(json::parse(require(ws.l2(), "summarize")));
  auto l3 = FineSummary::from_json(json::parse(require(ws.l3(), "summarize")));
  auto contents = load_contents(cfg, snap, log);

  StrategyInputs inputs{&snap, &contents, &l1, &l2, &l3};
  Diagnostics diag;
  std::vector<GenerationTask> tasks;
  std::string used;
  for (auto s : cfg.strategies) {
    auto part = build_tasks(inputs, s, cfg.gen, &diag);
    tasks.insert(tasks.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    used += (used.empty() ? "" : ",") + std::string(to_string(s));
  }
  for (const auto& w : diag.warnings) log << "warning: " << w << "\n";

  std::string tasks_jsonl;
  for (const auto& t : tasks) tasks_jsonl += t.to_json().dump() + "\n";
  write_text(ws.tasks(), tasks_jsonl);

  std::unique_ptr<ChatBackend> owned;
  if (!backend) {
    owned = make_backend(cfg.backend);
    backend = owned.get();
  }
  CompletionRunConfig run;
  run.model_id = cfg.backend.model;
  run.temperature = cfg.backend.temperature;
  run.max_output_tokens = cfg.backend.max_output_tokens;
  run.max_concurrency = cfg.backend.max_concurrency;
  run.retry.max_attempts = cfg.backend.max_attempts;
  run.retry.base_delay = std::chrono::milliseconds(cfg.backend.base_delay_ms);
  run.seed = cfg.gen.seed;
  auto done = complete_tasks(tasks, cfg.gen, run, *backend, sleeper);

  std::string out;
  std::size_t failed = 0;
  for (const auto& c : done) {
    if (!c.ok) {
      ++failed;
      log << "warning: task " << c.task_id << " failed: " << c.error << "\n";
      continue;
    }
    out += c.to_json().dump() + "\n";
  }
  write_text(ws.completions(), out);
  if (!tasks.empty() && failed == tasks.size()) throw BackendFailure("every generation request failed");
  return "gen: " + used + ", " + std::to_string(tasks.size()) + " tasks, " + std::to_string(done.size() - failed) +
         " completions, " + std::to_string(failed) + " failed";
}

std::string run_curate(const PipelineConfig& cfg, std::ostream& log) {
  (void)log;
  Workspace ws{cfg.workspace};
  auto snap = load_snapshot(ws);
  std::vector<GenerationTask> tasks;
  for (const auto& line : jsonl_lines(require(ws.tasks(), "gen"))) tasks.push_back(GenerationTask::from_json(json::parse(line)));
  std::vector<RawCompletion> completions;
  for (const auto& line : jsonl_lines(require(ws.completions(), "gen"))) {
    completions.push_back(RawCompletion::from_json(json::parse(line)));
  }
  auto res = curate(tasks, completions, snap, cfg.curation);
  write_text(ws.dataset(), pairs_to_jsonl(res.pairs));
  write_text(ws.curation(), res.report.to_json().dump(2) + "\n");

  const auto& r = res.report;
  std::string removed;
  for (const auto& [s, n] : r.balance_removed_per_strategy) {
    removed += (removed.empty() ? "" : ",") + s + "=" + std::to_string(n);
  }
  return "curate: " + std::to_string(r.items_in) + " items, " + std::to_string(r.accepted) + " accepted, " +
         std::to_string(r.rejected_total()) + " rejected, " + std::to_string(r.dedup_removed) + " duplicates, " +
         "balance removed [" + removed + "], " + std::to_string(r.final_pairs) + " pairs";
}

std::string run_split(const PipelineConfig& cfg, std::ostream& log) {
  (void)log;
  Workspace ws{cfg.workspace};
  auto pairs = pairs_from_jsonl(require(ws.dataset(), "curate"));
  auto ds = split_dataset(pairs, cfg.split_ratio, cfg.split_seed);
  write_text(ws.split(), ds.split_json().dump(2) + "\n");
  return "split: " + std::to_string(pairs.size()) + " pairs -> " + std::to_string(ds.side(Side::train).size()) +
         " train / " + std::to_string(ds.side(Side::test).size()) + " test";
}

std::string run_export(const PipelineConfig& cfg, std::ostream& log) {
  (void)log;
  Workspace ws{cfg.workspace};
  auto snap = load_snapshot(ws);
  auto pairs = pairs_from_jsonl(require(ws.dataset(), "curate"));
  auto ds = Dataset::from_parts(std::move(pairs), json::parse(require(ws.split(), "split")));
  ExportOptions opts{cfg.eval.mode, cfg.eval.file_list_budget};
  auto train = export_training(ds, Side::train, snap, opts);
  auto test = export_training(ds, Side::test, snap, opts);
  write_text(ws.train_export(), train);
  write_text(ws.test_export(), test);
  return "export: " + std::to_string(jsonl_lines(train).size()) + " train, " + std::to_string(jsonl_lines(test).size()) +
         " test records (" + std::string(to_string(opts.mode)) + ")";
}

std::string run_eval(const PipelineConfig& cfg, std::ostream& log, ChatBackend* backend) {
  Workspace ws{cfg.workspace};
  auto snap = load_snapshot(ws);
  auto test = import_export(require(ws.test_export(), "export"));

  std::unique_ptr<Predictor> predictor;
  std::unique_ptr<ChatBackend> owned;
  std::optional<Bm25Index> index;
  const auto& kind = cfg.eval.predictor;
  if (kind == "oracle") {
    predictor = std::make_unique<OraclePredictor>();
  } else if (kind == "empty") {
    predictor = std::make_unique<EmptyPredictor>();
  } else if (kind == "bm25") {
    index = Bm25Index::from_repo(snap, load_contents(cfg, snap, log));
    predictor = std::make_unique<Bm25Predictor>(*index, cfg.eval.k);
  } else if (kind == "file") {
    if (cfg.eval.predictions_file.empty()) throw ConfigError("eval.predictions_file is required for the file predictor");
    if (!fs::exists(cfg.eval.predictions_file)) {
      throw ConfigError("predictions file not found: " + cfg.eval.predictions_file.string());
    }
    predictor = std::make_unique<FilePredictor>(read_text(cfg.eval.predictions_file));
  } else {
    if (!backend) {
      owned = make_backend(cfg.backend);
      backend = owned.get();
    }
    ChatPredictorConfig pc;
    pc.model_id = cfg.eval.model.empty() ? cfg.backend.model : cfg.eval.model;
    pc.mode = cfg.eval.mode;
    pc.file_list_budget = cfg.eval.file_list_budget;
    pc.max_concurrency = cfg.backend.max_concurrency;
    pc.retry.max_attempts = cfg.backend.max_attempts;
    pc.retry.base_delay = std::chrono::milliseconds(cfg.backend.base_delay_ms);
    predictor = std::make_unique<ChatPredictor>(*backend, snap, pc);
  }

  auto records = run_predictor(test, *predictor, snap);
  auto report = aggregate(records, test);
  const std::string name = cfg.eval.label.empty() ? kind : cfg.eval.label;
  write_text(ws.predictions(name), records_to_jsonl(records));
  write_text(ws.report(name), report.to_json().dump(2) + "\n");
  return "eval[" + name + "]: Q=" + std::to_string(report.question_count) + " EM=" + fixed(report.em) +
         " Recall=" + fixed(report.recall) + " Micro=" + fixed(report.micro_avg_recall) +
         " validity=" + fixed(report.validity_rate);
}

std::string run_report(const PipelineConfig& cfg, std::ostream& log) {
  (void)log;
  Workspace ws{cfg.workspace};
  std::vector<fs::path> files;
  if (fs::is_directory(ws.reports())) {
    for (const auto& e : fs::directory_iterator(ws.reports())) {
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    }
  }
  if (files.empty()) throw MissingArtifact(ws.reports() / "<name>.json", "eval");
  std::sort(files.begin(), files.end());
  std::vector<ReportRow> rows;
  for (const auto& f : files) rows.push_back({f.stem().string(), EvalReport::from_json(json::parse(read_text(f)))});
  write_text(ws.markdown_report(), render_markdown(rows));
  return "report: " + std::to_string(rows.size()) + " runs -> " + ws.markdown_report().string();
}

}  // namespace repoqa
