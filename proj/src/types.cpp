#include "repoqa/types.hpp"

#include <cstdio>

namespace repoqa {

std::string_view to_string(StrategyId id) noexcept {
  switch (id) {
    case StrategyId::S1: return "S1";
    case StrategyId::S2: return "S2";
    case StrategyId::S3: return "S3";
    case StrategyId::S4: return "S4";
    case StrategyId::S5: return "S5";
    case StrategyId::S6: return "S6";
  }
  return "S?";
}

std::optional<StrategyId> parse_strategy(std::string_view text) noexcept {
  for (auto id : kAllStrategies) {
    if (to_string(id) == text) return id;
  }
  if (text.size() == 1 && text[0] >= '1' && text[0] <= '6') {
    return static_cast<StrategyId>(text[0] - '1');
  }
  return std::nullopt;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) noexcept {
  std::uint64_t hash = seed;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

}  // namespace repoqa
