#include "repoqa/code_summarizer.hpp"

#include <algorithm>
#include <cstring>

#include <tree_sitter/api.h>

extern "C" const TSLanguage* tree_sitter_python(void);

namespace repoqa {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

// ---- tree-sitter helpers ---------------------------------------------------

std::string_view node_text(TSNode node, std::string_view src) {
  const auto start = ts_node_start_byte(node);
  const auto end = ts_node_end_byte(node);
  if (start >= src.size() || end > src.size() || end < start) return {};
  return src.substr(start, end - start);
}

bool is_type(TSNode node, const char* type) { return std::strcmp(ts_node_type(node), type) == 0; }

TSNode field(TSNode node, const char* name) {
  return ts_node_child_by_field_name(node, name, static_cast<std::uint32_t>(std::strlen(name)));
}

// Unwraps decorated_definition to the inner def/class.
TSNode definition_of(TSNode node) {
  if (is_type(node, "decorated_definition")) return field(node, "definition");
  return node;
}

std::string strip_string_literal(std::string_view lit) {
  std::size_t i = 0;
  while (i < lit.size() && std::strchr("rRuUbBfF", lit[i]) != nullptr) ++i;
  lit.remove_prefix(i);
  for (const char* q : {"\"\"\"", "'''", "\"", "'"}) {
    const auto n = std::strlen(q);
    if (lit.size() >= 2 * n && lit.substr(0, n) == q && lit.substr(lit.size() - n) == q) {
      return std::string(lit.substr(n, lit.size() - 2 * n));
    }
  }
  return std::string(lit);
}

// First statement of a module/def/class body when it is a bare string.
std::optional<std::string> docstring_of(TSNode body, std::string_view src) {
  if (ts_node_is_null(body)) return std::nullopt;
  const auto count = ts_node_named_child_count(body);
  for (std::uint32_t i = 0; i < count; ++i) {
    TSNode stmt = ts_node_named_child(body, i);
    if (is_type(stmt, "comment")) continue;
    if (!is_type(stmt, "expression_statement") || ts_node_named_child_count(stmt) != 1) return std::nullopt;
    TSNode expr = ts_node_named_child(stmt, 0);
    if (is_type(expr, "concatenated_string") && ts_node_named_child_count(expr) > 0) {
      expr = ts_node_named_child(expr, 0);
    }
    if (!is_type(expr, "string")) return std::nullopt;
    return docstring_first_line(strip_string_literal(node_text(expr, src)));
  }
  return std::nullopt;
}

// Joins header lines: a newline plus indentation becomes one space, or nothing
// right after an opening bracket / before a closing one.
std::string flatten_header(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\\' && i + 1 < text.size() && (text[i + 1] == '\n' || text[i + 1] == '\r')) {
      ++i;
      continue;
    }
    if (c == '\n' || c == '\r') {
      while (!out.empty() && (out.back() == ' ' || out.back() == '\t')) out.pop_back();
      std::size_t j = i;
      while (j < text.size() && std::strchr("\r\n \t", text[j]) != nullptr) ++j;
      const bool after_open = !out.empty() && std::strchr("([{", out.back()) != nullptr;
      const bool before_close = j < text.size() && std::strchr(")]}", text[j]) != nullptr;
      if (!out.empty() && !after_open && !before_close && j < text.size()) out.push_back(' ');
      i = j;
      continue;
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

std::string function_signature(TSNode outer, TSNode def, std::string_view src) {
  std::string sig;
  if (is_type(outer, "decorated_definition")) {
    const auto n = ts_node_named_child_count(outer);
    for (std::uint32_t i = 0; i < n; ++i) {
      TSNode child = ts_node_named_child(outer, i);
      if (!is_type(child, "decorator")) continue;
      sig += flatten_header(node_text(child, src));
      sig += '\n';
    }
  }
  TSNode body = field(def, "body");
  auto header_end = ts_node_is_null(body) ? ts_node_end_byte(def) : ts_node_start_byte(body);
  // The header ends at the ':' that introduces the body.
  const auto n = ts_node_child_count(def);
  for (std::uint32_t i = 0; i < n; ++i) {
    TSNode child = ts_node_child(def, i);
    if (!ts_node_is_named(child) && is_type(child, ":")) header_end = ts_node_start_byte(child);
  }
  const auto start = ts_node_start_byte(def);
  if (header_end > start && header_end <= src.size()) {
    sig += flatten_header(src.substr(start, header_end - start));
  }
  while (!sig.empty() && (sig.back() == ' ' || sig.back() == '\t')) sig.pop_back();
  return sig;
}

std::vector<std::string> class_bases(TSNode cls, std::string_view src) {
  std::vector<std::string> bases;
  TSNode args = field(cls, "superclasses");
  if (ts_node_is_null(args)) return bases;
  const auto n = ts_node_named_child_count(args);
  for (std::uint32_t i = 0; i < n; ++i) {
    TSNode arg = ts_node_named_child(args, i);
    if (is_type(arg, "keyword_argument") || is_type(arg, "comment") || is_type(arg, "dictionary_splat") ||
        is_type(arg, "list_splat"))
      continue;
    bases.push_back(flatten_header(node_text(arg, src)));
  }
  return bases;
}

std::string name_of(TSNode def, std::string_view src) { return std::string(node_text(field(def, "name"), src)); }

// Module- or class-body statements that define a function or class.
template <typename Fn>
void for_each_definition(TSNode body, Fn&& fn) {
  const auto n = ts_node_named_child_count(body);
  for (std::uint32_t i = 0; i < n; ++i) {
    TSNode outer = ts_node_named_child(body, i);
    TSNode def = definition_of(outer);
    if (ts_node_is_null(def)) continue;
    if (is_type(def, "function_definition") || is_type(def, "class_definition")) fn(outer, def);
  }
}

// ---- rendering helpers -------------------------------------------------------

std::vector<std::string_view> split_segments(std::string_view path) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto slash = path.find('/', start);
    if (slash == std::string_view::npos) {
      out.push_back(path.substr(start));
      return out;
    }
    out.push_back(path.substr(start, slash - start));
    start = slash + 1;
  }
}

std::string one_line(std::string_view text) {
  std::string out(text);
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

template <typename Summary, typename Fn>
std::map<RepoPath, Summary> summarize_each(const RepoSnapshot& snapshot, const RepoContents& contents,
                                           const ParserFactory& parsers, Diagnostics* diag, Execution exec,
                                           Fn&& extract) {
  const auto& files = snapshot.files();
  const auto count = static_cast<std::int64_t>(files.size());
  if (contents.by_index.size() != files.size()) {
    throw std::invalid_argument("contents do not match snapshot file count");
  }
  std::vector<Summary> results(files.size());
  std::vector<std::string> warnings(files.size());

  auto run_range = [&](std::map<std::string, std::unique_ptr<SourceParser>>& cache, std::int64_t i) {
    const auto& meta = files[static_cast<std::size_t>(i)];
    const auto& content = contents.by_index[static_cast<std::size_t>(i)];
    if (!content) {
      warnings[i] = "unreadable file " + meta.path.str() + "; empty summary";
      return;
    }
    auto& parser = cache[meta.language];
    if (!parser && parsers) parser = parsers(meta.language);
    if (!parser) {
      warnings[i] = "no parser for language '" + meta.language + "' (" + meta.path.str() + "); empty summary";
      return;
    }
    auto parsed = extract(*parser, *content);
    if (!parsed) {
      warnings[i] = "syntax error in " + meta.path.str() + "; empty summary";
      return;
    }
    results[i] = std::move(*parsed);
  };

  if (exec == Execution::parallel) {
#pragma omp parallel
    {
      std::map<std::string, std::unique_ptr<SourceParser>> cache;
#pragma omp for schedule(dynamic, 4)
      for (std::int64_t i = 0; i < count; ++i) run_range(cache, i);
    }
  } else {
    std::map<std::string, std::unique_ptr<SourceParser>> cache;
    for (std::int64_t i = 0; i < count; ++i) run_range(cache, i);
  }

  std::map<RepoPath, Summary> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (!warnings[i].empty() && diag) diag->warn(warnings[i]);
    out.emplace(files[i].path, std::move(results[i]));
  }
  return out;
}

ojson function_json(const FunctionSummary& f) {
  ojson j;
  j["name"] = f.name;
  j["signature"] = f.signature;
  j["doc_first_line"] = f.doc_first_line ? ojson(*f.doc_first_line) : ojson(nullptr);
  return j;
}

FunctionSummary function_from_json(const json& j) {
  FunctionSummary f;
  f.name = j.at("name").get<std::string>();
  f.signature = j.at("signature").get<std::string>();
  if (j.contains("doc_first_line") && !j.at("doc_first_line").is_null()) {
    f.doc_first_line = j.at("doc_first_line").get<std::string>();
  }
  return f;
}

RepoPath path_key(const std::string& key) {
  auto p = RepoPath::make(key);
  if (!p) throw std::invalid_argument("invalid path key in summary: " + key);
  return *p;
}

}  // namespace

// ---- PythonParser -------------------------------------------------------------

struct PythonParser::Impl {
  TSParser* parser = nullptr;

  Impl() : parser(ts_parser_new()) {
    if (!parser || !ts_parser_set_language(parser, tree_sitter_python())) {
      if (parser) ts_parser_delete(parser);
      throw std::runtime_error("tree-sitter python grammar failed to load");
    }
  }
  ~Impl() { ts_parser_delete(parser); }

  struct TreeDeleter {
    void operator()(TSTree* t) const noexcept { ts_tree_delete(t); }
  };
  using Tree = std::unique_ptr<TSTree, TreeDeleter>;

  Tree parse(std::string_view src) {
    Tree tree(ts_parser_parse_string(parser, nullptr, src.data(), static_cast<std::uint32_t>(src.size())));
    if (!tree || ts_node_has_error(ts_tree_root_node(tree.get()))) return nullptr;
    return tree;
  }
};

PythonParser::PythonParser() : impl_(std::make_unique<Impl>()) {}
PythonParser::~PythonParser() = default;
PythonParser::PythonParser(PythonParser&&) noexcept = default;
PythonParser& PythonParser::operator=(PythonParser&&) noexcept = default;

std::optional<FileEntities> PythonParser::entities(std::string_view source, const SummaryOptions& opts) {
  auto tree = impl_->parse(source);
  if (!tree) return std::nullopt;
  FileEntities out;
  for_each_definition(ts_tree_root_node(tree.get()), [&](TSNode, TSNode def) {
    if (is_type(def, "function_definition")) {
      out.functions.push_back(name_of(def, source));
      return;
    }
    ClassEntry cls{name_of(def, source), class_bases(def, source), {}};
    if (opts.l2_method_names) {
      TSNode body = field(def, "body");
      if (!ts_node_is_null(body)) {
        for_each_definition(body, [&](TSNode, TSNode inner) {
          if (is_type(inner, "function_definition")) cls.methods.push_back(name_of(inner, source));
        });
      }
    }
    out.classes.push_back(std::move(cls));
  });
  return out;
}

std::optional<FileSummary> PythonParser::summarize(std::string_view source) {
  auto tree = impl_->parse(source);
  if (!tree) return std::nullopt;
  TSNode root = ts_tree_root_node(tree.get());
  FileSummary out;
  out.module_doc_first_line = docstring_of(root, source);
  for_each_definition(root, [&](TSNode outer, TSNode def) {
    if (is_type(def, "function_definition")) {
      out.functions.push_back(
          {name_of(def, source), function_signature(outer, def, source), docstring_of(field(def, "body"), source)});
      return;
    }
    ClassSummary cls;
    cls.name = name_of(def, source);
    cls.bases = class_bases(def, source);
    TSNode body = field(def, "body");
    cls.doc_first_line = docstring_of(body, source);
    if (!ts_node_is_null(body)) {
      for_each_definition(body, [&](TSNode m_outer, TSNode m_def) {
        if (!is_type(m_def, "function_definition")) return;  // nested classes are skipped
        cls.methods.push_back({name_of(m_def, source), function_signature(m_outer, m_def, source),
                               docstring_of(field(m_def, "body"), source)});
      });
    }
    out.classes.push_back(std::move(cls));
  });
  return out;
}

ParserFactory default_parser_factory() {
  return [](std::string_view language) -> std::unique_ptr<SourceParser> {
    if (language == "python") return std::make_unique<PythonParser>();
    return nullptr;
  };
}

// ---- contents -------------------------------------------------------------------

RepoContents RepoContents::load(const std::filesystem::path& root, const RepoSnapshot& snapshot, Diagnostics* diag) {
  RepoContents out;
  out.by_index.reserve(snapshot.files().size());
  for (const auto& meta : snapshot.files()) {
    auto content = read_file_content(root, meta.path);
    if (!content && diag) diag->warn("cannot read " + meta.path.str());
    out.by_index.push_back(std::move(content));
  }
  return out;
}

RepoContents RepoContents::from_map(const RepoSnapshot& snapshot, const std::map<std::string, std::string>& files) {
  RepoContents out;
  for (const auto& meta : snapshot.files()) {
    auto it = files.find(meta.path.str());
    out.by_index.push_back(it == files.end() ? std::nullopt : std::optional<std::string>(it->second));
  }
  return out;
}

// ---- rendering ----------------------------------------------------------------

std::string render_tree(const std::vector<RepoPath>& paths,
                        const std::function<std::vector<std::string>(const RepoPath&)>& annotate) {
  std::string out;
  std::vector<std::string_view> open_dirs;
  for (const auto& path : paths) {
    auto segments = split_segments(path.view());
    const auto file = segments.back();
    segments.pop_back();
    std::size_t common = 0;
    while (common < open_dirs.size() && common < segments.size() && open_dirs[common] == segments[common]) ++common;
    open_dirs.resize(common);
    for (std::size_t d = common; d < segments.size(); ++d) {
      out.append(2 * d, ' ');
      out.append(segments[d]);
      out.append("/\n");
      open_dirs.push_back(segments[d]);
    }
    const auto depth = segments.size();
    out.append(2 * depth, ' ');
    out.append(file);
    out.push_back('\n');
    if (annotate) {
      for (const auto& line : annotate(path)) {
        out.append(2 * (depth + 1), ' ');
        out.append(line);
        out.push_back('\n');
      }
    }
  }
  return out;
}

StructureTree summarize_l1(const RepoSnapshot& snapshot) {
  StructureTree tree;
  tree.entries = snapshot.paths();
  tree.rendered = render_tree(tree.entries);
  return tree;
}

EntityIndex summarize_l2(const RepoSnapshot& snapshot, const RepoContents& contents, const ParserFactory& parsers,
                         const SummaryOptions& opts, Diagnostics* diag, Execution exec) {
  EntityIndex index;
  index.per_file = summarize_each<FileEntities>(
      snapshot, contents, parsers, diag, exec,
      [&](SourceParser& p, std::string_view src) { return p.entities(src, opts); });
  return index;
}

FineSummary summarize_l3(const RepoSnapshot& snapshot, const RepoContents& contents, const ParserFactory& parsers,
                         Diagnostics* diag, Execution exec) {
  FineSummary summary;
  summary.per_file = summarize_each<FileSummary>(snapshot, contents, parsers, diag, exec,
                                                 [](SourceParser& p, std::string_view src) { return p.summarize(src); });
  return summary;
}

std::optional<std::string> docstring_first_line(std::string_view body) {
  const auto first = body.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return std::nullopt;
  body.remove_prefix(first);
  const auto nl = body.find('\n');
  auto line = body.substr(0, nl);
  const auto last = line.find_last_not_of(" \t\r");
  line = line.substr(0, last + 1);
  if (line.empty()) return std::nullopt;
  return std::string(line);
}

std::vector<FileChunk> chunk_file(const FileMeta& meta, std::string_view content, std::uint64_t budget) {
  if (budget < 64) throw std::invalid_argument("chunk budget must be at least 64 tokens");
  const std::size_t max_bytes = static_cast<std::size_t>(budget) * 4;
  std::vector<FileChunk> chunks;
  auto emit = [&](std::string_view piece) {
    chunks.push_back(FileChunk{meta.path, static_cast<std::uint32_t>(chunks.size()), std::string(piece),
                               estimate_tokens(piece)});
  };
  if (content.empty()) {
    emit({});
    return chunks;
  }

  std::size_t chunk_start = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    const auto nl = content.find('\n', pos);
    const auto line_end = nl == std::string_view::npos ? content.size() : nl + 1;
    if (line_end - chunk_start <= max_bytes) {
      pos = line_end;
      continue;
    }
    if (pos > chunk_start) {
      emit(content.substr(chunk_start, pos - chunk_start));
      chunk_start = pos;
      continue;
    }
    // A single line longer than the budget: cut it.
    std::size_t cut = chunk_start + max_bytes;
    std::size_t back = cut;
    while (back > chunk_start && (static_cast<unsigned char>(content[back]) & 0xC0) == 0x80) --back;
    if (back > chunk_start) cut = back;
    emit(content.substr(chunk_start, cut - chunk_start));
    chunk_start = cut;
    pos = cut;
  }
  if (chunk_start < content.size()) emit(content.substr(chunk_start));
  return chunks;
}

std::string render_file_summary(const RepoPath& path, const FileSummary& summary) {
  std::string out = "FILE: " + path.str() + "\n";
  if (summary.module_doc_first_line) out += "  module doc: " + *summary.module_doc_first_line + "\n";
  for (const auto& fn : summary.functions) {
    out += "  " + one_line(fn.signature);
    if (fn.doc_first_line) out += "  # " + *fn.doc_first_line;
    out += "\n";
  }
  for (const auto& cls : summary.classes) {
    out += "  class " + cls.name;
    if (!cls.bases.empty()) {
      out += "(";
      for (std::size_t i = 0; i < cls.bases.size(); ++i) out += (i ? ", " : "") + cls.bases[i];
      out += ")";
    }
    if (cls.doc_first_line) out += "  # " + *cls.doc_first_line;
    out += "\n";
    for (const auto& m : cls.methods) {
      out += "    " + one_line(m.signature);
      if (m.doc_first_line) out += "  # " + *m.doc_first_line;
      out += "\n";
    }
  }
  return out;
}

std::vector<std::string> render_entity_lines(const FileEntities& entities) {
  std::vector<std::string> lines;
  for (const auto& cls : entities.classes) {
    std::string line = "class " + cls.name;
    if (!cls.bases.empty()) {
      line += "(";
      for (std::size_t i = 0; i < cls.bases.size(); ++i) line += (i ? ", " : "") + cls.bases[i];
      line += ")";
    }
    if (!cls.methods.empty()) {
      line += ":";
      for (std::size_t i = 0; i < cls.methods.size(); ++i) line += (i ? ", " : " ") + cls.methods[i];
    }
    lines.push_back(std::move(line));
  }
  for (const auto& fn : entities.functions) lines.push_back("def " + fn);
  return lines;
}

// ---- serialization ------------------------------------------------------------

nlohmann::ordered_json EntityIndex::to_json() const {
  ojson doc = ojson::object();
  for (const auto& [path, ents] : per_file) {
    ojson classes = ojson::array();
    for (const auto& c : ents.classes) {
      ojson cj;
      cj["name"] = c.name;
      cj["bases"] = c.bases;
      if (!c.methods.empty()) cj["methods"] = c.methods;
      classes.push_back(std::move(cj));
    }
    ojson entry;
    entry["classes"] = std::move(classes);
    entry["functions"] = ents.functions;
    doc[path.str()] = std::move(entry);
  }
  return doc;
}

EntityIndex EntityIndex::from_json(const json& doc) {
  EntityIndex index;
  for (const auto& [key, entry] : doc.items()) {
    FileEntities ents;
    for (const auto& c : entry.at("classes")) {
      ClassEntry cls{c.at("name").get<std::string>(), c.at("bases").get<std::vector<std::string>>(), {}};
      if (c.contains("methods")) cls.methods = c.at("methods").get<std::vector<std::string>>();
      ents.classes.push_back(std::move(cls));
    }
    ents.functions = entry.at("functions").get<std::vector<std::string>>();
    index.per_file.emplace(path_key(key), std::move(ents));
  }
  return index;
}

nlohmann::ordered_json FineSummary::to_json() const {
  ojson doc = ojson::object();
  for (const auto& [path, s] : per_file) {
    ojson entry;
    entry["module_doc_first_line"] = s.module_doc_first_line ? ojson(*s.module_doc_first_line) : ojson(nullptr);
    ojson fns = ojson::array();
    for (const auto& f : s.functions) fns.push_back(function_json(f));
    entry["functions"] = std::move(fns);
    ojson classes = ojson::array();
    for (const auto& c : s.classes) {
      ojson cj;
      cj["name"] = c.name;
      cj["bases"] = c.bases;
      cj["doc_first_line"] = c.doc_first_line ? ojson(*c.doc_first_line) : ojson(nullptr);
      ojson methods = ojson::array();
      for (const auto& m : c.methods) methods.push_back(function_json(m));
      cj["methods"] = std::move(methods);
      classes.push_back(std::move(cj));
    }
    entry["classes"] = std::move(classes);
    doc[path.str()] = std::move(entry);
  }
  return doc;
}

FineSummary FineSummary::from_json(const json& doc) {
  FineSummary summary;
  for (const auto& [key, entry] : doc.items()) {
    FileSummary s;
    if (!entry.at("module_doc_first_line").is_null()) {
      s.module_doc_first_line = entry.at("module_doc_first_line").get<std::string>();
    }
    for (const auto& f : entry.at("functions")) s.functions.push_back(function_from_json(f));
    for (const auto& c : entry.at("classes")) {
      ClassSummary cls;
      cls.name = c.at("name").get<std::string>();
      cls.bases = c.at("bases").get<std::vector<std::string>>();
      if (c.contains("doc_first_line") && !c.at("doc_first_line").is_null()) {
        cls.doc_first_line = c.at("doc_first_line").get<std::string>();
      }
      for (const auto& m : c.at("methods")) cls.methods.push_back(function_from_json(m));
      s.classes.push_back(std::move(cls));
    }
    summary.per_file.emplace(path_key(key), std::move(s));
  }
  return summary;
}

}  // namespace repoqa
