#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "repoqa/strategy_engine.hpp"

namespace repoqa {

enum class Role { system, user, assistant };

std::string_view to_string(Role role) noexcept;

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ChatRequest {
  std::string model_id;
  std::vector<ChatMessage> messages;
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;

  /// Throws std::invalid_argument on empty contents, a negative temperature
  /// or a system message that is not first.
  void validate() const;
  /// {"model","messages","temperature","max_tokens"}
  nlohmann::ordered_json to_wire() const;
};

ChatRequest make_chat_request(const PromptBundle& prompt, std::string model_id, double temperature,
                              std::uint32_t max_output_tokens);

/// One HTTP-level (or simulated) exchange.
struct BackendReply {
  int status = 200;  // 0 means the transport failed or timed out
  std::string text;
  std::uint64_t latency_ms = 0;
  std::string error;
};

/// Chat-completion provider. `task` is the generation task behind the
/// request when there is one; remote backends ignore it.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual BackendReply send(const ChatRequest& request, const GenerationTask* task) = 0;
  virtual std::string id() const = 0;
  /// True when the backend cannot take concurrent calls.
  virtual bool single_flight() const { return false; }
};

/// Credential rejected (HTTP 401/403). Fatal for the whole run.
class AuthError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exponential backoff with full jitter: attempt n waits uniform[0, base * factor^(n-1)].
struct RetryPolicy {
  std::uint32_t max_attempts = 5;
  std::chrono::milliseconds base_delay{1000};
  double factor = 2.0;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Real sleep.
Sleeper thread_sleeper();

struct RawCompletion {
  std::string task_id;
  std::string text;
  std::uint64_t latency_ms = 0;
  std::uint32_t attempt_count = 1;
  std::string backend_id;
  bool ok = true;
  std::string error;

  /// {"task_id","text","latency_ms","attempt_count"}
  nlohmann::ordered_json to_json() const;
  static RawCompletion from_json(const nlohmann::json& doc);
};

/// Sends `request`, retrying 429 / 5xx / transport failures per `policy`.
/// Returns ok=false when attempts run out or the backend rejects the request;
/// throws AuthError on 401/403.
RawCompletion complete(const ChatRequest& request, ChatBackend& backend, const RetryPolicy& policy,
                       std::string task_id, const GenerationTask* task = nullptr, const Sleeper& sleeper = {},
                       std::uint64_t jitter_seed = 0);

struct CompletionRunConfig {
  std::string model_id = "scripted";
  double temperature = 0.7;
  std::uint32_t max_output_tokens = 1024;
  std::uint32_t max_concurrency = 4;
  RetryPolicy retry;
  std::uint64_t seed = 0;
};

/// Completes every task with at most max_concurrency requests in flight.
/// The result is in task order regardless of arrival order.
std::vector<RawCompletion> complete_tasks(const std::vector<GenerationTask>& tasks, const GenConfig& gen,
                                          const CompletionRunConfig& run, ChatBackend& backend,
                                          const Sleeper& sleeper = thread_sleeper());

// ---- backends ---------------------------------------------------------------------

/// POSTs to a chat-completions compatible endpoint; reads
/// choices[0].message.content.
class HttpBackend final : public ChatBackend {
 public:
  HttpBackend(std::string endpoint_url, std::string api_key, std::chrono::seconds timeout = std::chrono::seconds(120));
  BackendReply send(const ChatRequest& request, const GenerationTask* task) override;
  std::string id() const override { return "http:" + endpoint_; }

 private:
  std::string endpoint_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

/// Offline deterministic backend: one single-path question per focus file,
/// capped at the task's max_questions, plus one two-file question when the
/// task has room and allows two paths.
class ScriptedBackend final : public ChatBackend {
 public:
  BackendReply send(const ChatRequest& request, const GenerationTask* task) override;
  std::string id() const override { return "scripted"; }

  /// The exact completion text produced for `task`.
  static std::string script(const GenerationTask& task);
};

/// Wraps a callable; handy for tests and custom replays.
class FunctionBackend final : public ChatBackend {
 public:
  using Fn = std::function<BackendReply(const ChatRequest&, const GenerationTask*)>;
  explicit FunctionBackend(Fn fn, std::string id = "function", bool single_flight = false)
      : fn_(std::move(fn)), id_(std::move(id)), single_flight_(single_flight) {}
  BackendReply send(const ChatRequest& request, const GenerationTask* task) override { return fn_(request, task); }
  std::string id() const override { return id_; }
  bool single_flight() const override { return single_flight_; }

 private:
  Fn fn_;
  std::string id_;
  bool single_flight_;
};

// ---- JSON extraction ------------------------------------------------------------------

enum class Validity { strict, salvaged, invalid };

std::string_view to_string(Validity v) noexcept;
Validity parse_validity(std::string_view text);

struct GeneratedItem {
  std::string question;
  std::vector<std::string> paths;
};

struct ParsedItems {
  std::vector<GeneratedItem> items;
  Validity validity = Validity::invalid;
};

/// Whole text as a JSON array of {"question", "relevant_file_paths"|"file"}
/// objects is strict; otherwise the first balanced bracketed substring that
/// parses to such an array is salvaged; otherwise invalid.
ParsedItems extract_items(std::string_view text);

struct ParsedPaths {
  std::vector<std::string> paths;
  Validity validity = Validity::invalid;
};

/// Inference-side variant: accepts a bare array of strings, or the object
/// form (paths are unioned across objects).
ParsedPaths extract_paths(std::string_view text);

struct ValidityStats {
  std::uint64_t strict = 0;
  std::uint64_t salvaged = 0;
  std::uint64_t invalid = 0;

  void add(Validity v) noexcept;
  std::uint64_t total() const noexcept { return strict + salvaged + invalid; }
  /// Fraction that is strict or salvaged; 0 for an empty tally.
  double usable_rate() const noexcept;
  nlohmann::ordered_json to_json() const;
};

}  // namespace repoqa
