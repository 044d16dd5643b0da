#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "heat/alert.hpp"

namespace heat {

using KeyId = std::string;

enum class KeyMode { per_source_ip, per_source_asn };

inline constexpr std::string_view kUnknownAsnKey = "asn-unknown";

KeyMode parse_key_mode(std::string_view text);
const char* to_string(KeyMode mode);

/// Longest-prefix CIDR → ASN lookup for IPv4 and IPv6.
class AsnTable {
 public:
  void add(std::string_view cidr, std::uint32_t asn);
  std::optional<std::uint32_t> lookup(std::string_view ip) const;
  std::size_t size() const noexcept { return entries_; }

  /// CSV with rows `cidr,asn`; an optional header row is skipped.
  static AsnTable load_csv(const std::string& path);
  static AsnTable from_csv(std::istream& in);

 private:
  using Addr = std::array<std::uint8_t, 16>;
  struct PrefixKey {
    Addr addr;
    bool operator==(const PrefixKey&) const = default;
  };
  struct PrefixHash {
    std::size_t operator()(const PrefixKey& k) const noexcept;
  };
  // Indexed by prefix length over the 128-bit (v4-mapped) address space.
  std::map<int, std::unordered_map<PrefixKey, std::uint32_t, PrefixHash>, std::greater<>> by_length_;
  std::size_t entries_ = 0;
};

/// Parses an IPv4/IPv6 address into the v4-mapped 128-bit form.
std::optional<std::array<std::uint8_t, 16>> parse_ip(std::string_view ip);

/// Source IP in IP mode; "AS<n>" (or `asn-unknown`) in ASN mode.
KeyId resolve_aggregation_key(const Alert& alert, KeyMode mode, const AsnTable* asn_table);

}  // namespace heat
