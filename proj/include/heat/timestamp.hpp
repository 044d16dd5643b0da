#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace heat {

/// Parses ISO-8601 / Suricata timestamps ("2021-11-05T14:23:11.123456+0000",
/// "...Z", "...+01:00") into UTC epoch seconds.
std::optional<double> parse_timestamp(std::string_view text);

/// Suricata format with microseconds and "+0000" offset.
std::string format_timestamp(double epoch_seconds);

/// Rounds to the microsecond value that survives a format/parse round trip.
double quantize_timestamp(double epoch_seconds);

}  // namespace heat
