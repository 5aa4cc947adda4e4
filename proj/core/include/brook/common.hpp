#pragma once

#include <cstdint>
#include <string_view>

namespace brook {

enum class LockMode : std::uint8_t { kShared, kExclusive };

constexpr bool compatible(LockMode a, LockMode b) {
  return a == LockMode::kShared && b == LockMode::kShared;
}

constexpr std::string_view to_string(LockMode m) {
  return m == LockMode::kShared ? "S" : "X";
}

enum class TxnClass : std::uint8_t { kStatic, kDynamic };

}  // namespace brook
