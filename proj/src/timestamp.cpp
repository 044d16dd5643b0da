#include "heat/timestamp.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>

namespace heat {
namespace {

bool read_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  auto [p, ec] = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return ec == std::errc{} && p == s.data() + pos + len;
}

}  // namespace

std::optional<double> parse_timestamp(std::string_view s) {
  // Plain epoch seconds.
  if (!s.empty() && s.find('-', 1) == std::string_view::npos) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc{} && p == s.data() + s.size() && std::isfinite(v) && v >= 0.0) return v;
    return std::nullopt;
  }
  int year, month, day, hour, minute, second;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  if (!read_int(s, 0, 4, year) || !read_int(s, 5, 2, month) || !read_int(s, 8, 2, day) ||
      !read_int(s, 11, 2, hour) || !read_int(s, 14, 2, minute) || !read_int(s, 17, 2, second)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  double fraction = 0.0;
  if (pos < s.size() && s[pos] == '.') {
    std::size_t start = ++pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == start) return std::nullopt;
    const std::size_t digits = std::min<std::size_t>(pos - start, 18);
    long long value = 0;
    std::from_chars(s.data() + start, s.data() + start + digits, value);
    fraction = static_cast<double>(value) / std::pow(10.0, static_cast<double>(digits));
  }
  int offset_seconds = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      const int sign = s[pos] == '-' ? -1 : 1;
      ++pos;
      int oh = 0, om = 0;
      if (!read_int(s, pos, 2, oh)) return std::nullopt;
      pos += 2;
      if (pos < s.size() && s[pos] == ':') ++pos;
      if (!read_int(s, pos, 2, om)) return std::nullopt;
      pos += 2;
      offset_seconds = sign * (oh * 3600 + om * 60);
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  const auto days = sys_days{ymd}.time_since_epoch().count();
  const double epoch = static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second -
                       offset_seconds;
  // Fraction added last so microsecond values round-trip exactly through format_timestamp.
  const double value = epoch + fraction;
  if (!(value >= 0.0)) return std::nullopt;
  return value;
}

std::string format_timestamp(double epoch_seconds) {
  using namespace std::chrono;
  const double whole = std::floor(epoch_seconds);
  long long micros = std::llround((epoch_seconds - whole) * 1e6);
  long long secs = static_cast<long long>(whole);
  if (micros >= 1000000) {
    micros -= 1000000;
    ++secs;
  }
  const sys_days day{days{secs >= 0 ? secs / 86400 : (secs - 86399) / 86400}};
  const long long rem = secs - static_cast<long long>(day.time_since_epoch().count()) * 86400;
  const year_month_day ymd{day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02lld:%02lld:%02lld.%06lld+0000", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), rem / 3600,
                (rem / 60) % 60, rem % 60, micros);
  return buf;
}

}  // namespace heat

namespace heat {

double quantize_timestamp(double epoch_seconds) {
  double whole = std::floor(epoch_seconds);
  long long micros = std::llround((epoch_seconds - whole) * 1e6);
  if (micros >= 1000000) {
    micros -= 1000000;
    whole += 1.0;
  }
  return whole + static_cast<double>(micros) / std::pow(10.0, 6.0);
}

}  // namespace heat
