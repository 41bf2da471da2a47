#include <gtest/gtest.h>

#include <atomic>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "repoqa/generation_client.hpp"
#include "support/test_support.hpp"

using namespace repoqa;
using namespace repoqa::testing;
using nlohmann::json;

namespace {

GenerationTask task_with(StrategyId s, const std::vector<std::string>& focus, std::uint32_t max_q) {
  GenerationTask t;
  t.id = std::string(to_string(s)) + "-0000";
  t.strategy = s;
  t.context = "ctx";
  t.manifest = rps(focus);
  t.focus = rps(focus);
  auto b = path_bounds(s);
  t.min_paths = b.min_paths;
  t.max_paths = b.max_paths;
  t.max_questions = max_q;
  return t;
}

ChatRequest simple_request() {
  return make_chat_request(PromptBundle{"sys", "hello"}, "m", 0.0, 16);
}

/// Loopback chat endpoint answering with a scripted status sequence.
class LoopbackServer {
 public:
  explicit LoopbackServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto n = calls_.fetch_add(1);
      {
        std::lock_guard lock(mu_);
        last_body_ = req.body;
        last_auth_ = req.get_header_value("Authorization");
      }
      const int status = n < statuses_.size() ? statuses_[n] : 200;
      res.status = status;
      if (status == 200) {
        json body{{"choices", json::array({{{"message", {{"role", "assistant"}, {"content", "[\"a.py\"]"}}}}})}};
        res.set_content(body.dump(), "application/json");
      } else {
        res.set_content("{\"error\":\"nope\"}", "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::size_t calls() const { return calls_.load(); }
  std::string last_body() {
    std::lock_guard lock(mu_);
    return last_body_;
  }
  std::string last_auth() {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::atomic<std::size_t> calls_{0};
  std::mutex mu_;
  std::string last_body_;
  std::string last_auth_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(ExtractItems, StrictObjectArray) {
  auto r = extract_items(R"([{"question":"Where?","relevant_file_paths":["a.py","b.py"]}])");
  EXPECT_EQ(r.validity, Validity::strict);
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].question, "Where?");
  EXPECT_EQ(r.items[0].paths, (std::vector<std::string>{"a.py", "b.py"}));
}

TEST(ExtractItems, FileKey) {
  auto r = extract_items(R"([{"question":"Q1","file":["x.py"]},{"question":"Q2","file":["y.py"]}])");
  EXPECT_EQ(r.validity, Validity::strict);
  ASSERT_EQ(r.items.size(), 2u);
  EXPECT_EQ(r.items[0].paths, std::vector<std::string>{"x.py"});
  EXPECT_EQ(r.items[1].paths, std::vector<std::string>{"y.py"});
}

TEST(ExtractItems, SalvagedFileKey) {
  auto r = extract_items(R"(Sure! Here: [{"question":"Q?","file":["a.py"]}])");
  EXPECT_EQ(r.validity, Validity::salvaged);
  EXPECT_EQ(r.items.size(), 1u);
}

TEST(ExtractItems, SalvagedFromProse) {
  auto r = extract_items("Sure! Here you go:\n```json\n[{\"question\":\"Q\",\"relevant_file_paths\":[\"a.py\"]}]\n```\n");
  EXPECT_EQ(r.validity, Validity::salvaged);
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].paths, std::vector<std::string>{"a.py"});
}

TEST(ExtractItems, SalvageSkipsBracketsInsideStrings) {
  auto r = extract_items("note [draft] then [{\"question\":\"What is [x]?\",\"relevant_file_paths\":[\"a.py\"]}] end");
  EXPECT_EQ(r.validity, Validity::salvaged);
  ASSERT_EQ(r.items.size(), 1u);
  EXPECT_EQ(r.items[0].question, "What is [x]?");
}

TEST(ExtractItems, Invalid) {
  for (const char* text : {"", "no json here", "{\"question\":\"Q\"}", "[1, 2, 3]", "[{\"question\":\"Q\"",
                           "[\"a.py\"]"}) {
    auto r = extract_items(text);
    EXPECT_EQ(r.validity, Validity::invalid) << text;
    EXPECT_TRUE(r.items.empty()) << text;
  }
}

TEST(ExtractPaths, Forms) {
  auto bare = extract_paths(R"(["a.py", "b.py"])");
  EXPECT_EQ(bare.validity, Validity::strict);
  EXPECT_EQ(bare.paths, (std::vector<std::string>{"a.py", "b.py"}));
  auto empty = extract_paths("[]");
  EXPECT_EQ(empty.validity, Validity::strict);
  EXPECT_TRUE(empty.paths.empty());
  auto obj = extract_paths(R"([{"question":"q","relevant_file_paths":["a.py"]},{"question":"r","file":["b.py"]}])");
  EXPECT_EQ(obj.validity, Validity::strict);
  EXPECT_EQ(obj.paths, (std::vector<std::string>{"a.py", "b.py"}));
  auto salvaged = extract_paths("The answer is [\"src/x.py\"].");
  EXPECT_EQ(salvaged.validity, Validity::salvaged);
  EXPECT_EQ(salvaged.paths, std::vector<std::string>{"src/x.py"});
  EXPECT_EQ(extract_paths("I don't know").validity, Validity::invalid);
}

TEST(ValidityStats, Rates) {
  ValidityStats s;
  EXPECT_EQ(s.usable_rate(), 0.0);
  s.add(Validity::strict);
  s.add(Validity::salvaged);
  s.add(Validity::invalid);
  s.add(Validity::strict);
  EXPECT_EQ(s.total(), 4u);
  EXPECT_DOUBLE_EQ(s.usable_rate(), 0.75);
  EXPECT_EQ(parse_validity("salvaged"), Validity::salvaged);
}

TEST(ScriptedBackend, SingleFileExample) {
  auto t = task_with(StrategyId::S1, {"a.py"}, 5);
  EXPECT_EQ(ScriptedBackend::script(t), R"([{"question":"What does a do?","relevant_file_paths":["a.py"]}])");
}

TEST(ScriptedBackend, CapsAtMaxQuestions) {
  auto t = task_with(StrategyId::S6, {"a.py", "b.py", "c.py"}, 2);
  auto parsed = extract_items(ScriptedBackend::script(t));
  EXPECT_EQ(parsed.validity, Validity::strict);
  EXPECT_EQ(parsed.items.size(), 2u);
}

TEST(ScriptedBackend, TwoFileItemWhenRoom) {
  auto t = task_with(StrategyId::S4, {"a.py", "b.py"}, 8);
  auto parsed = extract_items(ScriptedBackend::script(t));
  ASSERT_EQ(parsed.items.size(), 3u);
  EXPECT_EQ(parsed.items[2].paths, (std::vector<std::string>{"a.py", "b.py"}));
  ScriptedBackend backend;
  EXPECT_EQ(backend.send(simple_request(), nullptr).status, 400);
}

TEST(ChatRequest, ValidateAndWire) {
  auto r = simple_request();
  EXPECT_NO_THROW(r.validate());
  auto wire = r.to_wire();
  EXPECT_EQ(wire["model"], "m");
  EXPECT_EQ(wire["messages"][0]["role"], "system");
  EXPECT_EQ(wire["messages"][1]["content"], "hello");
  auto bad = r;
  bad.temperature = -1;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = r;
  std::swap(bad.messages[0], bad.messages[1]);
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = r;
  bad.messages[1].content.clear();
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Complete, RetriesThenSucceeds) {
  std::vector<int> script{429, 503, 200};
  std::size_t n = 0;
  FunctionBackend backend([&](const ChatRequest&, const GenerationTask*) {
    const int s = script.at(n++);
    return BackendReply{s, s == 200 ? "ok" : "", 5, {}};
  });
  std::vector<std::chrono::milliseconds> waits;
  RetryPolicy policy;
  policy.base_delay = std::chrono::milliseconds(100);
  auto out = complete(simple_request(), backend, policy, "t1", nullptr, [&](auto d) { waits.push_back(d); });
  EXPECT_TRUE(out.ok);
  EXPECT_EQ(out.attempt_count, 3u);
  EXPECT_EQ(out.text, "ok");
  EXPECT_EQ(out.latency_ms, 15u);
  ASSERT_EQ(waits.size(), 2u);
  EXPECT_LE(waits[0].count(), 100);
  EXPECT_LE(waits[1].count(), 200);
}

TEST(Complete, ExhaustsAttempts) {
  std::size_t n = 0;
  FunctionBackend backend([&](const ChatRequest&, const GenerationTask*) {
    ++n;
    return BackendReply{0, "", 0, "timeout"};
  });
  RetryPolicy policy;
  policy.max_attempts = 3;
  auto out = complete(simple_request(), backend, policy, "t", nullptr, [](auto) {});
  EXPECT_FALSE(out.ok);
  EXPECT_EQ(n, 3u);
  EXPECT_EQ(out.attempt_count, 3u);
  EXPECT_NE(out.error.find("retries exhausted"), std::string::npos);
}

TEST(Complete, NonRetryableStopsAtOnce) {
  std::size_t n = 0;
  FunctionBackend backend([&](const ChatRequest&, const GenerationTask*) {
    ++n;
    return BackendReply{400, "", 0, "bad"};
  });
  auto out = complete(simple_request(), backend, RetryPolicy{}, "t", nullptr, [](auto) {});
  EXPECT_FALSE(out.ok);
  EXPECT_EQ(n, 1u);
}

TEST(HttpBackend, LoopbackRetryThenSuccess) {
  LoopbackServer server({429, 429, 200});
  HttpBackend backend(server.url(), "secret", std::chrono::seconds(5));
  RetryPolicy policy;
  policy.base_delay = std::chrono::milliseconds(1);
  auto out = complete(simple_request(), backend, policy, "t", nullptr, [](auto) {});
  EXPECT_TRUE(out.ok) << out.error;
  EXPECT_EQ(out.attempt_count, 3u);
  EXPECT_EQ(out.text, "[\"a.py\"]");
  EXPECT_EQ(server.calls(), 3u);
  EXPECT_EQ(server.last_auth(), "Bearer secret");
  auto body = json::parse(server.last_body());
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"].size(), 2u);
}

TEST(HttpBackend, UnauthorizedIsFatal) {
  LoopbackServer server({401});
  HttpBackend backend(server.url(), "bad", std::chrono::seconds(5));
  EXPECT_THROW(complete(simple_request(), backend, RetryPolicy{}, "t", nullptr, [](auto) {}), AuthError);
  EXPECT_EQ(server.calls(), 1u);
}

TEST(HttpBackend, UnreachableIsTransportFailure) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpBackend backend("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions", "", std::chrono::seconds(1));
  auto reply = backend.send(simple_request(), nullptr);
  EXPECT_EQ(reply.status, 0);
}

TEST(CompleteTasks, KeepsTaskOrderUnderConcurrency) {
  std::vector<GenerationTask> tasks;
  for (int i = 0; i < 40; ++i) {
    auto t = task_with(StrategyId::S1, {"f" + std::to_string(i) + ".py"}, 5);
    t.id = "S1-" + std::to_string(1000 + i);
    tasks.push_back(t);
  }
  std::atomic<int> in_flight{0}, peak{0};
  FunctionBackend backend([&](const ChatRequest&, const GenerationTask* task) {
    const int now = ++in_flight;
    int seen = peak.load();
    while (now > seen && !peak.compare_exchange_weak(seen, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(task->id.back() % 3));
    --in_flight;
    return BackendReply{200, task->id, 0, {}};
  });
  CompletionRunConfig run;
  run.max_concurrency = 4;
  auto results = complete_tasks(tasks, GenConfig{}, run, backend, [](auto) {});
  ASSERT_EQ(results.size(), tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(results[i].task_id, tasks[i].id);
    EXPECT_EQ(results[i].text, tasks[i].id);
  }
  EXPECT_LE(peak.load(), 4);
}

TEST(CompleteTasks, AuthErrorPropagates) {
  std::vector<GenerationTask> tasks{task_with(StrategyId::S1, {"a.py"}, 5), task_with(StrategyId::S1, {"b.py"}, 5)};
  FunctionBackend backend([](const ChatRequest&, const GenerationTask*) { return BackendReply{403, "", 0, {}}; });
  EXPECT_THROW(complete_tasks(tasks, GenConfig{}, CompletionRunConfig{}, backend, [](auto) {}), AuthError);
}

TEST(RawCompletion, JsonRoundTrip) {
  RawCompletion c{"S1-0001", "[]", 12, 2, "scripted", true, ""};
  auto j = c.to_json();
  std::vector<std::string> keys;
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  EXPECT_EQ(keys[0], "task_id");
  auto back = RawCompletion::from_json(json::parse(j.dump()));
  EXPECT_EQ(back.task_id, c.task_id);
  EXPECT_EQ(back.text, c.text);
  EXPECT_EQ(back.attempt_count, 2u);
}
