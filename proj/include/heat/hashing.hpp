#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace heat {

/// 64-bit FNV-1a. Stable across platforms; used for fingerprints.
constexpr std::uint64_t fnv1a(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

}  // namespace heat
