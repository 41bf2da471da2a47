#include <gtest/gtest.h>

#include <random>

#include "repoqa/repo_snapshot.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;

TEST(Types, StrategyNamesRoundTrip) {
  for (auto s : kAllStrategies) {
    EXPECT_EQ(parse_strategy(to_string(s)), s);
  }
  EXPECT_EQ(parse_strategy("3"), StrategyId::S3);
  EXPECT_FALSE(parse_strategy("S7").has_value());
  EXPECT_FALSE(parse_strategy("").has_value());
}

TEST(Types, Fnv1aKnownVectors) {
  // Published FNV-1a 64 test vectors.
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
  EXPECT_EQ(to_hex(0xabcULL), "0000000000000abc");
}

TEST(Types, ShuffleIsAPermutationAndSeeded) {
  std::vector<int> base(50);
  for (int i = 0; i < 50; ++i) base[i] = i;
  auto a = base, b = base;
  std::mt19937_64 r1(9), r2(9);
  stable_shuffle(r1, a);
  stable_shuffle(r2, b);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, base);
  EXPECT_NE(a, base);
}

TEST(RepoPath, RejectsInvalid) {
  for (const char* bad : {"", "/abs.py", "a\\b.py", "./a.py", "a/../b.py", "a//b.py", "a/", "."}) {
    EXPECT_FALSE(RepoPath::make(bad).has_value()) << bad;
  }
  auto p = RepoPath::make("src/flask/app.py");
  ASSERT_TRUE(p);
  EXPECT_EQ(p->filename(), "app.py");
  EXPECT_EQ(p->parent(), "src/flask");
  EXPECT_EQ(p->stem(), "app");
}

TEST(RepoPath, ByteOrder) {
  EXPECT_LT(rp("B.py"), rp("a.py"));
  EXPECT_LT(rp("a.py"), rp("a/b.py"));  // '.' < '/'
}

TEST(EstimateTokens, Ceiling) {
  EXPECT_EQ(estimate_tokens(std::string_view("")), 0u);
  EXPECT_EQ(estimate_tokens(std::string_view("12345678")), 2u);
  EXPECT_EQ(estimate_tokens(std::string_view("123456789")), 3u);
  EXPECT_EQ(estimate_tokens(std::uint64_t{1}), 1u);
}

TEST(Scan, CountsAndFilter) {
  TempDir dir("scan");
  dir.write("a.py", "x = 1\n");
  dir.write("sub/b.py", "def f():\n    pass\n");
  dir.write("README.md", "# r\n");
  Diagnostics diag;
  auto snap = scan_repository(dir.path(), ScanConfig{}, &diag);
  EXPECT_EQ(snap.total_files_seen(), 3u);
  EXPECT_EQ(snap.code_files_used(), 2u);
  ASSERT_EQ(snap.files().size(), 2u);
  EXPECT_EQ(snap.files()[0].path.str(), "a.py");
  EXPECT_EQ(snap.files()[1].path.str(), "sub/b.py");
  EXPECT_EQ(snap.files()[1].line_count, 2u);
  EXPECT_EQ(snap.files()[1].byte_size, 18u);
  EXPECT_EQ(snap.files()[1].token_estimate, 5u);
  EXPECT_TRUE(diag.warnings.empty());
}

TEST(Scan, EmptyDirectory) {
  TempDir dir("scan-empty");
  auto snap = scan_repository(dir.path(), ScanConfig{});
  EXPECT_EQ(snap.total_files_seen(), 0u);
  EXPECT_EQ(snap.code_files_used(), 0u);
}

TEST(Scan, IgnoredDirsAndSymlinks) {
  TempDir dir("scan-ign");
  dir.write("a.py", "");
  dir.write(".git/hooks/x.py", "");
  dir.write("node_modules/m.py", "");
  dir.write("pkg/__pycache__/c.py", "");
  std::filesystem::create_symlink(dir.path() / "a.py", dir.path() / "link.py");
  auto snap = scan_repository(dir.path(), ScanConfig{});
  EXPECT_EQ(snap.total_files_seen(), 1u);
  ASSERT_EQ(snap.files().size(), 1u);
  EXPECT_EQ(snap.files()[0].token_estimate, 0u);
}

TEST(Scan, MissingRootIsFatal) {
  EXPECT_THROW(scan_repository("/nonexistent/repoqa/root", ScanConfig{}), ScanError);
}

TEST(Scan, FixtureIsDeterministic) {
  auto a = scan_repository(fixture_repo(), ScanConfig{});
  auto b = scan_repository(fixture_repo(), ScanConfig{});
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  EXPECT_EQ(a.label(), "sample_repo");
  EXPECT_EQ(a.total_files_seen(), 18u);
  EXPECT_EQ(a.code_files_used(), 16u);
}

TEST(Snapshot, JsonRoundTripAndSchema) {
  auto snap = make_snapshot(std::map<std::string, std::string>{{"b.py", "abc\n"}, {"a.py", ""}});
  auto j = snap.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys, (std::vector<std::string>{"label", "total_files_seen", "code_files_used", "files"}));
  EXPECT_EQ(j["files"][0]["path"], "a.py");
  auto back = RepoSnapshot::from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.to_json().dump(), j.dump());
}

TEST(Snapshot, RejectsDuplicates) {
  std::vector<FileMeta> metas{{rp("a.py"), "python", 0, 0, 0}, {rp("a.py"), "python", 0, 0, 0}};
  EXPECT_THROW(RepoSnapshot("r", metas, 2), std::invalid_argument);
}

namespace {
std::string normalized(const NormalizeResult& r) {
  if (auto* n = std::get_if<NormalizedPath>(&r)) return n->text + (n->member ? "" : " (non-member)");
  return "rejected:" + std::get<PathRejection>(r).reason;
}
}  // namespace

TEST(NormalizePath, Examples) {
  auto snap = make_snapshot(std::vector<std::string>{"src/click/core.py", "src/flask/app.py"}, "flask");
  EXPECT_EQ(normalized(normalize_path("src\\click\\core.py", snap)), "src/click/core.py");
  EXPECT_EQ(normalized(normalize_path("./src/flask/app.py", snap)), "src/flask/app.py");
  EXPECT_EQ(normalized(normalize_path("flask/src/flask/app.py", snap)), "src/flask/app.py");
  EXPECT_EQ(normalized(normalize_path("  src/flask/app.py ", snap)), "src/flask/app.py");
  EXPECT_EQ(normalized(normalize_path("ghost.py", snap)), "ghost.py (non-member)");
  EXPECT_EQ(normalized(normalize_path("", snap)), "rejected:empty");
  EXPECT_EQ(normalized(normalize_path("/etc/passwd", snap)), "rejected:absolute");
  EXPECT_EQ(normalized(normalize_path("C:\\x.py", snap)), "rejected:absolute");
  EXPECT_EQ(normalized(normalize_path("../x.py", snap)), "rejected:parent_segment");
}

TEST(NormalizePath, Idempotent) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "pkg/b.py", "repo/c.py"}, "repo");
  for (const char* raw : {"./pkg/b.py", "repo\\pkg\\b.py", "repo/a.py", "x/y.py", "repo/c.py", "repo/repo/c.py"}) {
    auto once = normalize_path(raw, snap);
    auto* n = std::get_if<NormalizedPath>(&once);
    ASSERT_NE(n, nullptr) << raw;
    EXPECT_EQ(normalized(normalize_path(n->text, snap)), normalized(once)) << raw;
  }
}
