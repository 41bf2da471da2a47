#include "repoqa/generation_client.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>

namespace repoqa {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

// Finds '['..']' spans in order of their opening bracket, skipping over JSON
// string literals, and returns the first span whose parse satisfies `accept`.
template <typename Accept>
std::optional<json> first_balanced_array(std::string_view text, Accept&& accept) {
  for (std::size_t open = text.find('['); open != std::string_view::npos; open = text.find('[', open + 1)) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    std::size_t close = std::string_view::npos;
    for (std::size_t j = open; j < text.size(); ++j) {
      const char c = text[j];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '[') {
        ++depth;
      } else if (c == ']') {
        if (--depth == 0) {
          close = j;
          break;
        }
      }
    }
    if (close == std::string_view::npos) continue;
    auto doc = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (!doc.is_discarded() && doc.is_array() && accept(doc)) return doc;
  }
  return std::nullopt;
}

const json* paths_field(const json& obj) {
  if (!obj.is_object()) return nullptr;
  for (const char* key : {"relevant_file_paths", "file"}) {
    auto it = obj.find(key);
    if (it != obj.end()) return &*it;
  }
  return nullptr;
}

bool string_array(const json& arr) {
  if (!arr.is_array()) return false;
  for (const auto& v : arr) {
    if (!v.is_string()) return false;
  }
  return true;
}

// Array of {"question": str, <paths key>: [str...]}.
bool item_array(const json& doc) {
  if (!doc.is_array()) return false;
  for (const auto& el : doc) {
    if (!el.is_object()) return false;
    auto q = el.find("question");
    if (q == el.end() || !q->is_string()) return false;
    const json* paths = paths_field(el);
    if (paths == nullptr || !string_array(*paths)) return false;
  }
  return true;
}

std::vector<GeneratedItem> items_from(const json& doc) {
  std::vector<GeneratedItem> out;
  for (const auto& el : doc) {
    out.push_back({el.at("question").get<std::string>(), paths_field(el)->get<std::vector<std::string>>()});
  }
  return out;
}

// Inference accepts ["a","b"], [{...paths...}], or {...paths...}.
std::optional<std::vector<std::string>> paths_from(const json& doc) {
  if (string_array(doc)) return doc.get<std::vector<std::string>>();
  auto from_object = [](const json& obj) -> std::optional<std::vector<std::string>> {
    const json* p = paths_field(obj);
    if (p == nullptr) {
      auto it = obj.find("paths");
      if (it == obj.end()) return std::nullopt;
      p = &*it;
    }
    if (!string_array(*p)) return std::nullopt;
    return p->get<std::vector<std::string>>();
  };
  if (doc.is_object()) return from_object(doc);
  if (!doc.is_array() || doc.empty()) return std::nullopt;
  std::vector<std::string> all;
  for (const auto& el : doc) {
    auto part = el.is_object() ? from_object(el) : std::nullopt;
    if (!part) return std::nullopt;
    all.insert(all.end(), part->begin(), part->end());
  }
  return all;
}

struct ParsedUrl {
  std::string base;
  std::string path;
};

ParsedUrl split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint_url must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/v1/chat/completions"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

std::string question_for(StrategyId s, std::string_view stem) {
  const std::string name(stem);
  switch (s) {
    case StrategyId::S1: return "What does " + name + " do?";
    case StrategyId::S2: return "Which file implements the " + name + " module?";
    case StrategyId::S3: return "Where are the classes and functions of " + name + " defined?";
    case StrategyId::S4: return "Which file documents the behaviour of " + name + "?";
    case StrategyId::S5: return "How does " + name + " fit into the rest of the repository?";
    case StrategyId::S6: return "Which file contains the source code for " + name + "?";
  }
  return "What does " + name + " do?";
}

}  // namespace

std::string_view to_string(Role role) noexcept {
  switch (role) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

void ChatRequest::validate() const {
  if (!(temperature >= 0.0)) throw std::invalid_argument("temperature must be >= 0");
  for (std::size_t i = 0; i < messages.size(); ++i) {
    if (messages[i].content.empty()) throw std::invalid_argument("chat message content must be nonempty");
    if (messages[i].role == Role::system && i != 0) throw std::invalid_argument("system message must come first");
  }
}

nlohmann::ordered_json ChatRequest::to_wire() const {
  ojson body;
  body["model"] = model_id;
  auto msgs = ojson::array();
  for (const auto& m : messages) {
    ojson mj;
    mj["role"] = std::string(to_string(m.role));
    mj["content"] = m.content;
    msgs.push_back(std::move(mj));
  }
  body["messages"] = std::move(msgs);
  body["temperature"] = temperature;
  body["max_tokens"] = max_output_tokens;
  return body;
}

ChatRequest make_chat_request(const PromptBundle& prompt, std::string model_id, double temperature,
                              std::uint32_t max_output_tokens) {
  ChatRequest req;
  req.model_id = std::move(model_id);
  req.messages = {{Role::system, prompt.system}, {Role::user, prompt.user}};
  req.temperature = temperature;
  req.max_output_tokens = max_output_tokens;
  return req;
}

Sleeper thread_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

RawCompletion complete(const ChatRequest& request, ChatBackend& backend, const RetryPolicy& policy,
                       std::string task_id, const GenerationTask* task, const Sleeper& sleeper,
                       std::uint64_t jitter_seed) {
  request.validate();
  RawCompletion out;
  out.task_id = std::move(task_id);
  out.backend_id = backend.id();
  std::mt19937_64 rng(jitter_seed ^ fnv1a64(out.task_id));
  const auto max_attempts = std::max<std::uint32_t>(1, policy.max_attempts);

  for (std::uint32_t attempt = 1;; ++attempt) {
    auto reply = backend.send(request, task);
    out.attempt_count = attempt;
    out.latency_ms += reply.latency_ms;
    if (reply.status >= 200 && reply.status < 300) {
      out.text = std::move(reply.text);
      out.ok = true;
      out.error.clear();
      return out;
    }
    if (reply.status == 401 || reply.status == 403) {
      throw AuthError("backend " + backend.id() + " rejected the credential (HTTP " + std::to_string(reply.status) +
                      ")");
    }
    out.ok = false;
    out.error = "HTTP " + std::to_string(reply.status) + (reply.error.empty() ? "" : ": " + reply.error);
    if (!retryable(reply.status)) return out;
    if (attempt >= max_attempts) {
      out.error = "retries exhausted after " + std::to_string(attempt) + " attempts; last " + out.error;
      return out;
    }
    const double ceiling = static_cast<double>(policy.base_delay.count()) * std::pow(policy.factor, attempt - 1);
    const auto wait = uniform_below(rng, static_cast<std::uint64_t>(ceiling) + 1);
    if (sleeper) sleeper(std::chrono::milliseconds(wait));
  }
}

std::vector<RawCompletion> complete_tasks(const std::vector<GenerationTask>& tasks, const GenConfig& gen,
                                          const CompletionRunConfig& run, ChatBackend& backend,
                                          const Sleeper& sleeper) {
  std::vector<RawCompletion> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr fatal;
  std::mutex fatal_mu;

  auto worker = [&] {
    while (!stop.load()) {
      const auto i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const auto& task = tasks[i];
      try {
        auto request = make_chat_request(render_prompt(task, gen), run.model_id, run.temperature,
                                         run.max_output_tokens);
        results[i] = complete(request, backend, run.retry, task.id, &task, sleeper, run.seed);
      } catch (...) {
        std::lock_guard lock(fatal_mu);
        if (!fatal) fatal = std::current_exception();
        stop.store(true);
      }
    }
  };

  const auto workers = backend.single_flight() ? 1u : std::max<std::uint32_t>(1, run.max_concurrency);
  if (workers == 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::uint32_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (fatal) std::rethrow_exception(fatal);
  return results;
}

// ---- HttpBackend ----------------------------------------------------------------------

HttpBackend::HttpBackend(std::string endpoint_url, std::string api_key, std::chrono::seconds timeout)
    : endpoint_(std::move(endpoint_url)), api_key_(std::move(api_key)), timeout_(timeout) {
  auto parts = split_url(endpoint_);
  base_ = std::move(parts.base);
  path_ = std::move(parts.path);
}

BackendReply HttpBackend::send(const ChatRequest& request, const GenerationTask*) {
  BackendReply reply;
  const auto started = std::chrono::steady_clock::now();
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, request.to_wire().dump(), "application/json");
  reply.latency_ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count());
  if (!res) {
    reply.status = 0;
    reply.error = httplib::to_string(res.error());
    return reply;
  }
  reply.status = res->status;
  if (res->status < 200 || res->status >= 300) {
    reply.error = res->body.substr(0, 512);
    return reply;
  }
  auto doc = json::parse(res->body, nullptr, false);
  try {
    reply.text = doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    // A 2xx without a readable choice is a malformed response, not a retry case.
    reply.status = 422;
    reply.error = std::string("unexpected response shape: ") + e.what();
  }
  return reply;
}

// ---- ScriptedBackend --------------------------------------------------------------------

std::string ScriptedBackend::script(const GenerationTask& task) {
  ojson out = ojson::array();
  const char* key = task.strategy == StrategyId::S4 ? "file" : "relevant_file_paths";
  for (std::size_t i = 0; i < task.focus.size() && i < task.max_questions; ++i) {
    ojson item;
    item["question"] = question_for(task.strategy, task.focus[i].stem());
    item[key] = ojson::array({task.focus[i].str()});
    out.push_back(std::move(item));
  }
  // One two-file question when the task allows it and there is room.
  if (task.focus.size() >= 2 && task.max_paths >= 2 && out.size() < task.max_questions) {
    ojson item;
    item["question"] = "Which files are involved when " + std::string(task.focus[0].stem()) + " works with " +
                       std::string(task.focus[1].stem()) + "?";
    item[key] = ojson::array({task.focus[0].str(), task.focus[1].str()});
    out.push_back(std::move(item));
  }
  return out.dump();
}

BackendReply ScriptedBackend::send(const ChatRequest&, const GenerationTask* task) {
  if (task == nullptr) return {400, {}, 0, "scripted backend needs a generation task"};
  return {200, script(*task), 0, {}};
}

// ---- extraction -------------------------------------------------------------------

std::string_view to_string(Validity v) noexcept {
  switch (v) {
    case Validity::strict: return "strict";
    case Validity::salvaged: return "salvaged";
    case Validity::invalid: return "invalid";
  }
  return "invalid";
}

Validity parse_validity(std::string_view text) {
  if (text == "strict") return Validity::strict;
  if (text == "salvaged") return Validity::salvaged;
  if (text == "invalid") return Validity::invalid;
  throw std::invalid_argument("unknown parse validity '" + std::string(text) + "'");
}

ParsedItems extract_items(std::string_view text) {
  auto whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded() && item_array(whole)) return {items_from(whole), Validity::strict};
  auto salvaged = first_balanced_array(text, item_array);
  if (salvaged) return {items_from(*salvaged), Validity::salvaged};
  return {{}, Validity::invalid};
}

ParsedPaths extract_paths(std::string_view text) {
  auto whole = json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (auto paths = paths_from(whole)) return {std::move(*paths), Validity::strict};
  }
  auto salvaged = first_balanced_array(text, [](const json& doc) { return paths_from(doc).has_value(); });
  if (salvaged) return {*paths_from(*salvaged), Validity::salvaged};
  return {{}, Validity::invalid};
}

void ValidityStats::add(Validity v) noexcept {
  switch (v) {
    case Validity::strict: ++strict; break;
    case Validity::salvaged: ++salvaged; break;
    case Validity::invalid: ++invalid; break;
  }
}

double ValidityStats::usable_rate() const noexcept {
  const auto n = total();
  return n == 0 ? 0.0 : static_cast<double>(strict + salvaged) / static_cast<double>(n);
}

nlohmann::ordered_json ValidityStats::to_json() const {
  ojson j;
  j["strict"] = strict;
  j["salvaged"] = salvaged;
  j["invalid"] = invalid;
  j["usable_rate"] = usable_rate();
  return j;
}

nlohmann::ordered_json RawCompletion::to_json() const {
  ojson j;
  j["task_id"] = task_id;
  j["text"] = text;
  j["latency_ms"] = latency_ms;
  j["attempt_count"] = attempt_count;
  return j;
}

RawCompletion RawCompletion::from_json(const json& doc) {
  RawCompletion c;
  c.task_id = doc.at("task_id").get<std::string>();
  c.text = doc.at("text").get<std::string>();
  c.latency_ms = doc.value("latency_ms", std::uint64_t{0});
  c.attempt_count = doc.value("attempt_count", std::uint32_t{1});
  c.backend_id = doc.value("backend_id", std::string("replay"));
  return c;
}

}  // namespace repoqa
