#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "heat/corpus.hpp"
#include "heat/heat_model.hpp"

namespace heat {

inline constexpr double kUnboundedLookback = std::numeric_limits<double>::infinity();

/// Either an alert id, or a signature + timestamp with optional address filters.
struct IocQuery {
  std::optional<std::string> alert_id;
  std::optional<std::string> signature;
  std::optional<double> timestamp;
  std::optional<std::string> src_ip;
  std::optional<std::string> dst_ip;
};

struct Ioc {
  std::string critical_alert_id;
  std::string critical_episode_id;
  double timestamp = 0.0;
  std::string signature;

  friend bool operator==(const Ioc&, const Ioc&) = default;
};

nlohmann::json to_json(const Ioc& ioc);

/// Throws not_found for unknown alerts, validation on ambiguous queries.
Ioc resolve_ioc(const IocQuery& query, const Corpus& corpus);
Ioc resolve_ioc(const std::string& alert_id, const Corpus& corpus);

/// One representative alert per episode among alerts whose signature contains
/// `signature_filter` and whose severity ≤ `max_severity`; earliest alert wins.
std::vector<Ioc> candidate_iocs(const Corpus& corpus, std::string_view signature_filter = {},
                                int max_severity = std::numeric_limits<int>::max());

enum class HacMethod { heat_model, src_match, tgt_match, src_and_tgt_match };

HacMethod parse_hac_method(std::string_view text);
const char* to_string(HacMethod method);

struct HeatedEpisode {
  std::size_t index = 0;  // into the episode store
  double heat = 0.0;
};

/// Prior episodes heated above `threshold`, sorted by peak time.
/// `window` holds every prior episode that was considered.
struct Hac {
  Ioc ioc;
  std::size_t critical_index = 0;
  HacMethod method = HacMethod::heat_model;
  double lookback_seconds = kUnboundedLookback;
  double threshold = 0.0;
  std::vector<HeatedEpisode> heated;
  std::vector<std::size_t> window;
};

/// Store indices with peak_time in [critical.peak - lookback, critical.peak).
std::vector<std::size_t> prior_window(const EpisodeStore& store, std::size_t critical_index,
                                      double lookback_seconds);

/// Heats every prior episode in the window; keeps heat > threshold.
Hac extract_hac(const Ioc& ioc, const HeatModel& model, const Corpus& corpus,
                double lookback_seconds, double threshold);

/// IP-matching baselines; matched episodes get a nominal heat of 3.
Hac extract_baseline(const Ioc& ioc, const Corpus& corpus, HacMethod method,
                     double lookback_seconds);

nlohmann::json to_json(const Hac& hac, const EpisodeStore& store);

}  // namespace heat
