#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace repoqa {

/// The six generation strategies. S1 per-file, S2 repo structure, S3 class and
/// function index, S4 signatures with docstrings, S5 structure plus one file
/// summary, S6 token-budgeted file batches.
enum class StrategyId : std::uint8_t { S1, S2, S3, S4, S5, S6 };

inline constexpr std::array<StrategyId, 6> kAllStrategies = {
    StrategyId::S1, StrategyId::S2, StrategyId::S3,
    StrategyId::S4, StrategyId::S5, StrategyId::S6};

std::string_view to_string(StrategyId id) noexcept;
std::optional<StrategyId> parse_strategy(std::string_view text) noexcept;

/// Thrown for invalid configuration values or missing inputs a stage needs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Serial reference path or OpenMP-parallel path for the batch kernels.
enum class Execution { serial, parallel };

/// Non-fatal problems collected while a stage runs.
struct Diagnostics {
  std::vector<std::string> warnings;

  void warn(std::string message) { warnings.push_back(std::move(message)); }
};

/// 64-bit FNV-1a; stable across platforms and runs.
std::uint64_t fnv1a64(std::string_view data,
                      std::uint64_t seed = 0xcbf29ce484222325ULL) noexcept;

std::string to_hex(std::uint64_t value);

/// Deterministic uniform integer in [0, bound) drawn from a 64-bit engine.
/// Uses rejection so results do not depend on the standard library's
/// distribution implementation.
template <typename Engine>
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  if (bound <= 1) return 0;
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t draw = 0;
  do {
    draw = static_cast<std::uint64_t>(engine());
  } while (draw >= limit);
  return draw % bound;
}

/// Fisher-Yates shuffle on top of uniform_below.
template <typename Engine, typename T>
void stable_shuffle(Engine& engine, std::vector<T>& items) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace repoqa
