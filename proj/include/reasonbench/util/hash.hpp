#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace reasonbench {

/// 64-bit FNV-1a followed by a splitmix64 finalizer. Stable across
/// platforms and runs, unlike std::hash.
std::uint64_t stable_hash(std::string_view data, std::uint64_t seed = 0);

/// Per-item seed derived from a global seed and an item key, so results do
/// not depend on processing order.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

}  // namespace reasonbench
