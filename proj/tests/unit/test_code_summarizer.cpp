#include <gtest/gtest.h>

#include <random>

#include "repoqa/code_summarizer.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;

namespace {

const char* kSample = R"PY("""Module doc.

More."""
import os

@decorator
def f(a: int, b=2) -> str:
    """Line one.
    Line two."""
    def inner():
        pass
    return ""

class A(B, metaclass=M):
    """Class doc."""
    def m1(self):
        """First method."""
    def m2(self, x):
        """Second method.

        detail"""
    class Inner:
        pass

def g(): pass
)PY";

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == '\n') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

}  // namespace

TEST(L1, NestedRendering) {
  auto snap = make_snapshot(std::vector<std::string>{"a.py", "sub/b.py"});
  auto tree = summarize_l1(snap);
  EXPECT_EQ(tree.rendered, "a.py\nsub/\n  b.py\n");
  EXPECT_EQ(tree.entries, rps({"a.py", "sub/b.py"}));
}

TEST(L1, EmptySnapshot) {
  auto tree = summarize_l1(make_snapshot(std::vector<std::string>{}));
  EXPECT_EQ(tree.rendered, "");
  EXPECT_TRUE(tree.entries.empty());
}

TEST(L1, DirectoriesListedOnceAndPathsRecoverable) {
  const std::vector<std::string> paths{"src/flask/app.py", "src/flask/cli.py", "src/flask/json/tag.py", "tests/t.py"};
  auto tree = summarize_l1(make_snapshot(paths));
  // Rebuild full paths from indentation: each level is two spaces.
  std::vector<std::string> stack, rebuilt;
  for (const auto& line : lines_of(tree.rendered)) {
    std::size_t indent = line.find_first_not_of(' ');
    std::size_t depth = indent / 2;
    std::string name = line.substr(indent);
    stack.resize(depth);
    if (name.back() == '/') {
      stack.push_back(name.substr(0, name.size() - 1));
    } else {
      std::string full;
      for (const auto& s : stack) full += s + "/";
      rebuilt.push_back(full + name);
    }
  }
  EXPECT_EQ(rebuilt, paths);
  auto all = lines_of(tree.rendered);
  EXPECT_EQ(std::count(all.begin(), all.end(), "src/"), 1);
  EXPECT_EQ(std::count(all.begin(), all.end(), "  flask/"), 1);
}

TEST(PythonParser, EntitiesExample) {
  PythonParser parser;
  auto e = parser.entities("class A(B):\n  def m(self): pass\ndef f(): pass", {});
  ASSERT_TRUE(e);
  ASSERT_EQ(e->classes.size(), 1u);
  EXPECT_EQ(e->classes[0].name, "A");
  EXPECT_EQ(e->classes[0].bases, std::vector<std::string>{"B"});
  EXPECT_TRUE(e->classes[0].methods.empty());
  EXPECT_EQ(e->functions, std::vector<std::string>{"f"});
}

TEST(PythonParser, ImportsOnly) {
  PythonParser parser;
  auto e = parser.entities("import os\nfrom x import y\n", {});
  ASSERT_TRUE(e);
  EXPECT_TRUE(e->classes.empty());
  EXPECT_TRUE(e->functions.empty());
}

TEST(PythonParser, SyntaxErrorIsNullopt) {
  PythonParser parser;
  EXPECT_FALSE(parser.entities("def broken(:\n", {}).has_value());
  EXPECT_FALSE(parser.summarize("class (\n").has_value());
}

TEST(PythonParser, FineSummaryHandParse) {
  PythonParser parser;
  auto s = parser.summarize(kSample);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->module_doc_first_line, "Module doc.");
  ASSERT_EQ(s->functions.size(), 2u);
  EXPECT_EQ(s->functions[0].name, "f");
  EXPECT_EQ(s->functions[0].signature, "@decorator\ndef f(a: int, b=2) -> str");
  EXPECT_EQ(s->functions[0].doc_first_line, "Line one.");
  EXPECT_EQ(s->functions[1].name, "g");
  EXPECT_EQ(s->functions[1].signature, "def g()");
  EXPECT_FALSE(s->functions[1].doc_first_line.has_value());
  ASSERT_EQ(s->classes.size(), 1u);
  const auto& a = s->classes[0];
  EXPECT_EQ(a.name, "A");
  EXPECT_EQ(a.bases, std::vector<std::string>{"B"});
  EXPECT_EQ(a.doc_first_line, "Class doc.");
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.methods[0].signature, "def m1(self)");
  EXPECT_EQ(a.methods[0].doc_first_line, "First method.");
  EXPECT_EQ(a.methods[1].signature, "def m2(self, x)");
  EXPECT_EQ(a.methods[1].doc_first_line, "Second method.");
}

TEST(PythonParser, MethodNamesSwitch) {
  PythonParser parser;
  auto off = parser.entities(kSample, {});
  auto on = parser.entities(kSample, SummaryOptions{true});
  ASSERT_TRUE(off && on);
  EXPECT_TRUE(off->classes[0].methods.empty());
  EXPECT_EQ(on->classes[0].methods, (std::vector<std::string>{"m1", "m2"}));
  EXPECT_EQ(on->functions, (std::vector<std::string>{"f", "g"}));
}

TEST(Docstring, FirstLine) {
  EXPECT_EQ(docstring_first_line("Line one.\nLine two."), "Line one.");
  EXPECT_EQ(docstring_first_line("\n   Indented first.\n"), "Indented first.");
  EXPECT_FALSE(docstring_first_line("  \n \n").has_value());
}

TEST(Summaries, InvalidFileGivesEmptyEntryAndWarning) {
  std::map<std::string, std::string> files{{"ok.py", "def f(): pass\n"}, {"bad.py", "def (:\n"}};
  auto snap = make_snapshot(files);
  auto contents = RepoContents::from_map(snap, files);
  Diagnostics diag;
  auto l2 = summarize_l2(snap, contents, default_parser_factory(), {}, &diag);
  ASSERT_EQ(l2.per_file.size(), 2u);
  EXPECT_EQ(l2.per_file.at(rp("bad.py")), FileEntities{});
  EXPECT_EQ(l2.per_file.at(rp("ok.py")).functions, std::vector<std::string>{"f"});
  ASSERT_EQ(diag.warnings.size(), 1u);
  EXPECT_NE(diag.warnings[0].find("bad.py"), std::string::npos);
}

TEST(Summaries, L2IsProjectionOfL3OnFixture) {
  Diagnostics diag;
  auto snap = scan_repository(fixture_repo(), ScanConfig{});
  auto contents = RepoContents::load(fixture_repo(), snap, &diag);
  auto l2 = summarize_l2(snap, contents, default_parser_factory(), SummaryOptions{true});
  auto l3 = summarize_l3(snap, contents, default_parser_factory());
  ASSERT_EQ(l2.per_file.size(), snap.files().size());
  for (const auto& [path, fs] : l3.per_file) {
    const auto& e = l2.per_file.at(path);
    std::vector<std::string> fn;
    for (const auto& f : fs.functions) fn.push_back(f.name);
    EXPECT_EQ(e.functions, fn) << path.str();
    ASSERT_EQ(e.classes.size(), fs.classes.size()) << path.str();
    for (std::size_t i = 0; i < fs.classes.size(); ++i) {
      EXPECT_EQ(e.classes[i].name, fs.classes[i].name);
      EXPECT_EQ(e.classes[i].bases, fs.classes[i].bases);
      std::vector<std::string> methods;
      for (const auto& m : fs.classes[i].methods) methods.push_back(m.name);
      EXPECT_EQ(e.classes[i].methods, methods);
    }
    auto no_newline = [](const std::optional<std::string>& d) { return !d || d->find('\n') == std::string::npos; };
    EXPECT_TRUE(no_newline(fs.module_doc_first_line));
    for (const auto& f : fs.functions) EXPECT_TRUE(no_newline(f.doc_first_line));
  }
  EXPECT_TRUE(diag.warnings.empty());
}

TEST(Summaries, SerialAndParallelAgree) {
  auto snap = scan_repository(fixture_repo(), ScanConfig{});
  auto contents = RepoContents::load(fixture_repo(), snap);
  auto a = summarize_l3(snap, contents, default_parser_factory(), nullptr, Execution::serial);
  auto b = summarize_l3(snap, contents, default_parser_factory(), nullptr, Execution::parallel);
  EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
  auto c = summarize_l2(snap, contents, default_parser_factory(), {}, nullptr, Execution::serial);
  auto d = summarize_l2(snap, contents, default_parser_factory(), {}, nullptr, Execution::parallel);
  EXPECT_EQ(c.to_json().dump(), d.to_json().dump());
}

TEST(Summaries, JsonRoundTrip) {
  auto snap = scan_repository(fixture_repo(), ScanConfig{});
  auto contents = RepoContents::load(fixture_repo(), snap);
  auto l3 = summarize_l3(snap, contents, default_parser_factory());
  auto back = FineSummary::from_json(nlohmann::json::parse(l3.to_json().dump()));
  EXPECT_EQ(back.per_file, l3.per_file);
  auto l2 = summarize_l2(snap, contents, default_parser_factory());
  auto back2 = EntityIndex::from_json(nlohmann::json::parse(l2.to_json().dump()));
  EXPECT_EQ(back2.per_file, l2.per_file);
}

TEST(RenderFileSummary, ShowsSignaturesAndFirstLines) {
  PythonParser parser;
  auto s = parser.summarize(kSample);
  ASSERT_TRUE(s);
  auto text = render_file_summary(rp("pkg/mod.py"), *s);
  EXPECT_EQ(text.rfind("FILE: pkg/mod.py\n", 0), 0u);
  EXPECT_NE(text.find("Module doc."), std::string::npos);
  EXPECT_NE(text.find("def m2(self, x)"), std::string::npos);
  EXPECT_NE(text.find("Second method."), std::string::npos);
  EXPECT_EQ(text.find("detail"), std::string::npos);
  EXPECT_EQ(text.find("inner"), std::string::npos);
}

TEST(Chunking, SmallFileOneChunk) {
  std::string content(400, 'x');  // 100 tokens
  FileMeta meta{rp("a.py"), "python", content.size(), 1, estimate_tokens(content)};
  auto chunks = chunk_file(meta, content, 512);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].part_index, 0u);
  EXPECT_EQ(chunks[0].content, content);
}

TEST(Chunking, ThousandTokenFileTwoChunks) {
  std::string line(39, 'a');
  line += '\n';  // 40 bytes = 10 tokens
  std::string content;
  for (int i = 0; i < 100; ++i) content += line;
  FileMeta meta{rp("a.py"), "python", content.size(), 100, estimate_tokens(content)};
  auto chunks = chunk_file(meta, content, 512);
  ASSERT_EQ(chunks.size(), 2u);
  std::string joined;
  for (const auto& c : chunks) {
    EXPECT_LE(c.token_estimate, 512u);
    EXPECT_EQ(c.content.back(), '\n');
    joined += c.content;
  }
  EXPECT_EQ(joined, content);
}

TEST(Chunking, EmptyFileOneEmptyChunk) {
  FileMeta meta{rp("a.py"), "python", 0, 0, 0};
  auto chunks = chunk_file(meta, "", 512);
  ASSERT_EQ(chunks.size(), 1u);
  EXPECT_EQ(chunks[0].content, "");
}

TEST(Chunking, BudgetBelowMinimumThrows) {
  FileMeta meta{rp("a.py"), "python", 0, 0, 0};
  EXPECT_THROW(chunk_file(meta, "x", 63), std::invalid_argument);
}

TEST(Chunking, RandomRoundTrip) {
  std::mt19937_64 rng(123);
  const std::string alphabet = "ab \n\xc3\xa9";  // includes a two-byte UTF-8 char
  for (int round = 0; round < 300; ++round) {
    std::string content;
    const auto len = uniform_below(rng, 3000);
    for (std::uint64_t i = 0; i < len; ++i) {
      auto pick = uniform_below(rng, 5);
      if (pick == 4) content += "\xc3\xa9";
      else content += alphabet[pick];
    }
    // Occasionally one very long line.
    if (round % 7 == 0) content += std::string(1500, 'z');
    const std::uint64_t budget = 64 + uniform_below(rng, 200);
    FileMeta meta{rp("r.py"), "python", content.size(), 0, estimate_tokens(content)};
    auto chunks = chunk_file(meta, content, budget);
    std::string joined;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      EXPECT_EQ(chunks[i].part_index, i);
      EXPECT_LE(chunks[i].token_estimate, budget);
      EXPECT_EQ(chunks[i].token_estimate, estimate_tokens(chunks[i].content));
      joined += chunks[i].content;
    }
    ASSERT_EQ(joined, content) << "round " << round;
    // Only pieces of an overlong line may end without a newline (plus the tail).
    for (std::size_t i = 0; i + 1 < chunks.size(); ++i) {
      if (chunks[i].content.back() != '\n') {
        EXPECT_EQ(chunks[i].content.find('\n'), std::string::npos);
      }
    }
  }
}
