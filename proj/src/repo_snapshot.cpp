#include "repoqa/repo_snapshot.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

namespace repoqa {

namespace fs = std::filesystem;

namespace {

bool valid_repo_path(std::string_view text) {
  if (text.empty() || text.front() == '/') return false;
  if (text.find('\\') != std::string_view::npos) return false;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto slash = text.find('/', start);
    const auto end = slash == std::string_view::npos ? text.size() : slash;
    const auto segment = text.substr(start, end - start);
    if (segment.empty() || segment == "." || segment == "..") return false;
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return true;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::uint64_t count_lines(std::string_view content) {
  if (content.empty()) return 0;
  auto lines = static_cast<std::uint64_t>(std::count(content.begin(), content.end(), '\n'));
  if (content.back() != '\n') ++lines;
  return lines;
}

struct WalkState {
  const ScanConfig& filter;
  Diagnostics* diag;
  std::vector<FileMeta> files;
  std::uint64_t total = 0;
};

void walk(const fs::path& root, const fs::path& dir, const std::string& rel_prefix, WalkState& st) {
  std::error_code ec;
  fs::directory_iterator it(dir, fs::directory_options::skip_permission_denied, ec);
  if (ec) {
    if (st.diag) st.diag->warn("cannot list directory " + dir.string() + ": " + ec.message());
    return;
  }
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    const auto status = entry.symlink_status(ec);
    if (ec || fs::is_symlink(status)) continue;
    const std::string rel = rel_prefix.empty() ? name : rel_prefix + "/" + name;
    if (fs::is_directory(status)) {
      if (st.filter.ignored_dirs.count(name)) continue;
      walk(root, entry.path(), rel, st);
      continue;
    }
    if (!fs::is_regular_file(status)) continue;
    ++st.total;
    const auto ext = entry.path().extension().string();
    if (!st.filter.extensions.count(ext)) continue;
    auto repo_path = RepoPath::make(rel);
    if (!repo_path) {
      if (st.diag) st.diag->warn("skipping unrepresentable path " + rel);
      continue;
    }
    std::ifstream in(entry.path(), std::ios::binary);
    if (!in) {
      if (st.diag) st.diag->warn("cannot read " + rel);
      continue;
    }
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) {
      if (st.diag) st.diag->warn("read error on " + rel);
      continue;
    }
    FileMeta meta{*repo_path, language_for_extension(ext), content.size(), count_lines(content),
                  estimate_tokens(content)};
    st.files.push_back(std::move(meta));
  }
}

}  // namespace

std::optional<RepoPath> RepoPath::make(std::string_view text) {
  if (!valid_repo_path(text)) return std::nullopt;
  return RepoPath(std::string(text));
}

std::string_view RepoPath::filename() const noexcept {
  const auto slash = value_.rfind('/');
  return slash == std::string::npos ? std::string_view(value_) : std::string_view(value_).substr(slash + 1);
}

std::string_view RepoPath::parent() const noexcept {
  const auto slash = value_.rfind('/');
  return slash == std::string::npos ? std::string_view{} : std::string_view(value_).substr(0, slash);
}

std::string_view RepoPath::stem() const noexcept {
  const auto name = filename();
  const auto dot = name.rfind('.');
  if (dot == std::string_view::npos || dot == 0) return name;
  return name.substr(0, dot);
}

RepoSnapshot::RepoSnapshot(std::string label, std::vector<FileMeta> files, std::uint64_t total_files_seen)
    : label_(std::move(label)), files_(std::move(files)), total_files_seen_(total_files_seen) {
  std::sort(files_.begin(), files_.end(),
            [](const FileMeta& a, const FileMeta& b) { return a.path < b.path; });
  const auto dup = std::adjacent_find(files_.begin(), files_.end(),
                                      [](const FileMeta& a, const FileMeta& b) { return a.path == b.path; });
  if (dup != files_.end()) throw std::invalid_argument("duplicate path in snapshot: " + dup->path.str());
  if (files_.size() > total_files_seen_) {
    throw std::invalid_argument("code_files_used exceeds total_files_seen");
  }
}

const FileMeta* RepoSnapshot::find(std::string_view path) const noexcept {
  auto it = std::lower_bound(files_.begin(), files_.end(), path,
                             [](const FileMeta& m, std::string_view p) { return m.path.view() < p; });
  if (it != files_.end() && it->path.view() == path) return &*it;
  return nullptr;
}

bool RepoSnapshot::contains(std::string_view path) const noexcept { return find(path) != nullptr; }

std::vector<RepoPath> RepoSnapshot::paths() const {
  std::vector<RepoPath> out;
  out.reserve(files_.size());
  for (const auto& f : files_) out.push_back(f.path);
  return out;
}

nlohmann::ordered_json RepoSnapshot::to_json() const {
  nlohmann::ordered_json doc;
  doc["label"] = label_;
  doc["total_files_seen"] = total_files_seen_;
  doc["code_files_used"] = code_files_used();
  auto files = nlohmann::ordered_json::array();
  for (const auto& f : files_) {
    nlohmann::ordered_json item;
    item["path"] = f.path.str();
    item["language"] = f.language;
    item["byte_size"] = f.byte_size;
    item["line_count"] = f.line_count;
    item["token_estimate"] = f.token_estimate;
    files.push_back(std::move(item));
  }
  doc["files"] = std::move(files);
  return doc;
}

RepoSnapshot RepoSnapshot::from_json(const nlohmann::json& doc) {
  std::vector<FileMeta> files;
  for (const auto& item : doc.at("files")) {
    auto path = RepoPath::make(item.at("path").get<std::string>());
    if (!path) throw std::invalid_argument("invalid path in snapshot: " + item.at("path").dump());
    files.push_back(FileMeta{*path, item.at("language").get<std::string>(),
                             item.at("byte_size").get<std::uint64_t>(),
                             item.at("line_count").get<std::uint64_t>(),
                             item.at("token_estimate").get<std::uint64_t>()});
  }
  RepoSnapshot snap(doc.at("label").get<std::string>(), std::move(files),
                    doc.at("total_files_seen").get<std::uint64_t>());
  if (doc.contains("code_files_used") &&
      doc.at("code_files_used").get<std::uint64_t>() != snap.code_files_used()) {
    throw std::invalid_argument("code_files_used disagrees with files list");
  }
  return snap;
}

RepoSnapshot scan_repository(const fs::path& root, const ScanConfig& filter, Diagnostics* diag) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw ScanError("repository root is not a readable directory: " + root.string());
  fs::directory_iterator probe(root, ec);
  if (ec) throw ScanError("cannot read repository root " + root.string() + ": " + ec.message());

  auto canonical = fs::weakly_canonical(root, ec);
  if (ec) canonical = fs::absolute(root);
  std::string label = canonical.filename().string();
  if (label.empty()) label = canonical.parent_path().filename().string();

  WalkState st{filter, diag, {}, 0};
  walk(root, root, "", st);
  return RepoSnapshot(std::move(label), std::move(st.files), st.total);
}

std::optional<std::string> read_file_content(const fs::path& root, const RepoPath& path) {
  std::ifstream in(root / fs::path(path.str()), std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

NormalizeResult normalize_path(std::string_view raw, const RepoSnapshot& snapshot) {
  std::string text(trim(raw));
  if (text.empty()) return PathRejection{"empty"};
  std::replace(text.begin(), text.end(), '\\', '/');
  const bool drive_letter = text.size() >= 2 && text[1] == ':' &&
                            ((text[0] >= 'A' && text[0] <= 'Z') || (text[0] >= 'a' && text[0] <= 'z'));
  if (text.front() == '/' || drive_letter) return PathRejection{"absolute"};

  // Rebuild from segments: drop "." and empty segments, refuse "..".
  std::string cleaned;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto slash = text.find('/', start);
    const auto end = slash == std::string::npos ? text.size() : slash;
    const auto segment = std::string_view(text).substr(start, end - start);
    if (segment == "..") return PathRejection{"parent_segment"};
    if (!segment.empty() && segment != ".") {
      if (!cleaned.empty()) cleaned.push_back('/');
      cleaned.append(segment);
    }
    if (slash == std::string::npos) break;
    start = slash + 1;
  }
  if (cleaned.empty()) return PathRejection{"empty"};

  if (snapshot.contains(cleaned)) return NormalizedPath{cleaned, true};
  const auto& label = snapshot.label();
  if (!label.empty() && cleaned.size() > label.size() + 1 && cleaned.compare(0, label.size(), label) == 0 &&
      cleaned[label.size()] == '/') {
    auto stripped = cleaned.substr(label.size() + 1);
    if (snapshot.contains(stripped)) return NormalizedPath{std::move(stripped), true};
  }
  return NormalizedPath{std::move(cleaned), false};
}

std::string language_for_extension(std::string_view extension) {
  if (extension == ".py" || extension == ".pyi") return "python";
  if (extension == ".js" || extension == ".mjs" || extension == ".cjs") return "javascript";
  if (extension == ".ts" || extension == ".tsx") return "typescript";
  if (extension == ".c" || extension == ".h") return "c";
  if (extension == ".cc" || extension == ".cpp" || extension == ".cxx" || extension == ".hpp" ||
      extension == ".hh")
    return "cpp";
  if (extension == ".java") return "java";
  if (extension == ".go") return "go";
  if (extension == ".rs") return "rust";
  return "other";
}

}  // namespace repoqa
