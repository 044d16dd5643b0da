#include "heat/aggregation_key.hpp"

#include <arpa/inet.h>

#include <algorithm>
#include <charconv>
#include <cstring>
#include <fstream>
#include <istream>

#include "heat/error.hpp"
#include "heat/hashing.hpp"

namespace heat {

KeyMode parse_key_mode(std::string_view text) {
  if (text == "ip" || text == "per-source-ip") return KeyMode::per_source_ip;
  if (text == "asn" || text == "per-source-asn") return KeyMode::per_source_asn;
  fail(ErrorKind::validation, "unknown aggregation mode '" + std::string(text) + "' (expected ip|asn)", "mode");
}

const char* to_string(KeyMode mode) { return mode == KeyMode::per_source_ip ? "ip" : "asn"; }

std::optional<std::array<std::uint8_t, 16>> parse_ip(std::string_view ip) {
  std::array<std::uint8_t, 16> out{};
  const std::string s(ip);
  in_addr v4{};
  if (inet_pton(AF_INET, s.c_str(), &v4) == 1) {
    out[10] = 0xff;
    out[11] = 0xff;
    std::memcpy(out.data() + 12, &v4, 4);
    return out;
  }
  in6_addr v6{};
  if (inet_pton(AF_INET6, s.c_str(), &v6) == 1) {
    std::memcpy(out.data(), &v6, 16);
    return out;
  }
  return std::nullopt;
}

namespace {

std::array<std::uint8_t, 16> mask_prefix(std::array<std::uint8_t, 16> a, int bits) {
  for (int i = 0; i < 16; ++i) {
    const int keep = std::clamp(bits - i * 8, 0, 8);
    a[i] &= static_cast<std::uint8_t>(keep == 0 ? 0 : (0xff << (8 - keep)) & 0xff);
  }
  return a;
}

}  // namespace

std::size_t AsnTable::PrefixHash::operator()(const PrefixKey& k) const noexcept {
  return static_cast<std::size_t>(
      fnv1a(std::string_view(reinterpret_cast<const char*>(k.addr.data()), k.addr.size())));
}

void AsnTable::add(std::string_view cidr, std::uint32_t asn) {
  const auto slash = cidr.find('/');
  const auto addr = parse_ip(cidr.substr(0, slash));
  if (!addr) fail(ErrorKind::validation, "invalid CIDR '" + std::string(cidr) + "'", "cidr");
  const bool v4 = cidr.substr(0, slash).find(':') == std::string_view::npos;
  int bits = v4 ? 32 : 128;
  if (slash != std::string_view::npos) {
    const auto len = cidr.substr(slash + 1);
    auto [p, ec] = std::from_chars(len.data(), len.data() + len.size(), bits);
    if (ec != std::errc{} || p != len.data() + len.size() || bits < 0 || bits > (v4 ? 32 : 128)) {
      fail(ErrorKind::validation, "invalid prefix length in '" + std::string(cidr) + "'", "cidr");
    }
  }
  if (v4) bits += 96;
  by_length_[bits][PrefixKey{mask_prefix(*addr, bits)}] = asn;
  ++entries_;
}

std::optional<std::uint32_t> AsnTable::lookup(std::string_view ip) const {
  const auto addr = parse_ip(ip);
  if (!addr) return std::nullopt;
  for (const auto& [bits, table] : by_length_) {
    auto it = table.find(PrefixKey{mask_prefix(*addr, bits)});
    if (it != table.end()) return it->second;
  }
  return std::nullopt;
}

AsnTable AsnTable::from_csv(std::istream& in) {
  AsnTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) fail(ErrorKind::data, "ASN table line " + std::to_string(line_no) + ": expected cidr,asn");
    std::string cidr = line.substr(0, comma);
    std::string asn_text = line.substr(comma + 1);
    if (!asn_text.empty() && (asn_text[0] == 'A' || asn_text[0] == 'a')) asn_text.erase(0, 2);
    std::uint32_t asn = 0;
    auto [p, ec] = std::from_chars(asn_text.data(), asn_text.data() + asn_text.size(), asn);
    if (ec != std::errc{} || p != asn_text.data() + asn_text.size()) {
      if (line_no == 1) continue;  // header
      fail(ErrorKind::data, "ASN table line " + std::to_string(line_no) + ": invalid ASN");
    }
    try {
      table.add(cidr, asn);
    } catch (const Error& e) {
      fail(ErrorKind::data, "ASN table line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return table;
}

AsnTable AsnTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::data, "cannot open ASN table " + path);
  return from_csv(in);
}

KeyId resolve_aggregation_key(const Alert& alert, KeyMode mode, const AsnTable* asn_table) {
  if (mode == KeyMode::per_source_ip) return alert.src_ip;
  if (asn_table == nullptr) fail(ErrorKind::validation, "ASN aggregation requires an ASN table", "asn_table");
  auto asn = asn_table->lookup(alert.src_ip);
  if (!asn) return KeyId(kUnknownAsnKey);
  return "AS" + std::to_string(*asn);
}

}  // namespace heat
