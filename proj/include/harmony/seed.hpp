#pragma once

#include <cstdint>
#include <string_view>

namespace harmony::seed {

// All randomness flows from one run seed through named substreams, so adding
// a consumer never shifts the draws seen by another.

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// FNV-1a, 64 bit.
std::uint64_t fnv1a(std::string_view bytes) noexcept;

std::uint64_t derive(std::uint64_t base, std::string_view name) noexcept;
std::uint64_t derive(std::uint64_t base, std::uint64_t index) noexcept;

} // namespace harmony::seed
