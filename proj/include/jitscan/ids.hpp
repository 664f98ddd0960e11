#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <ostream>

namespace jitscan {

// Strongly typed integral identifier. Tag keeps pids, tids, uids and cpu
// indices from being mixed up at call sites.
template <typename Tag, typename Rep = std::uint32_t>
struct StrongId {
  Rep value{};

  constexpr StrongId() = default;
  constexpr explicit StrongId(Rep v) : value(v) {}

  friend constexpr auto operator<=>(StrongId, StrongId) = default;
  friend std::ostream& operator<<(std::ostream& os, StrongId id) { return os << id.value; }
};

using Pid = StrongId<struct PidTag>;
using Tid = StrongId<struct TidTag>;
using Uid = StrongId<struct UidTag>;
using CpuId = StrongId<struct CpuTag>;

using VPage = std::uint64_t;  // virtual page index
using VAddr = std::uint64_t;  // virtual byte address
using Tick = std::uint64_t;   // logical time

}  // namespace jitscan

template <typename Tag, typename Rep>
struct std::hash<jitscan::StrongId<Tag, Rep>> {
  std::size_t operator()(jitscan::StrongId<Tag, Rep> id) const noexcept {
    return std::hash<Rep>{}(id.value);
  }
};
