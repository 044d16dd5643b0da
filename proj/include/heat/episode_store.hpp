#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "heat/episode.hpp"

namespace heat {

/// Immutable set of episodes sorted by (peak_time, episode_id), with lookups
/// by id, by (key, stage) and by member alert id.
class EpisodeStore {
 public:
  EpisodeStore() = default;
  /// Sorts and indexes; throws when an alert id appears in two episodes.
  explicit EpisodeStore(std::vector<Episode> episodes);

  const std::vector<Episode>& episodes() const noexcept { return episodes_; }
  std::size_t size() const noexcept { return episodes_.size(); }
  bool empty() const noexcept { return episodes_.empty(); }
  std::size_t total_alerts() const noexcept { return by_alert_.size(); }

  const Episode& operator[](std::size_t index) const { return episodes_[index]; }
  std::optional<std::size_t> index_of(const std::string& episode_id) const;
  const Episode* find(const std::string& episode_id) const;
  /// Throws not_found.
  const Episode& at(const std::string& episode_id) const;

  std::optional<std::size_t> episode_of_alert(const std::string& alert_id) const;
  const std::vector<std::size_t>& group(const KeyId& key, const StageId& stage) const;

  /// Indices of episodes with peak_time in [from, to).
  std::pair<std::size_t, std::size_t> peak_range(double from, double to) const;

  void write_jsonl(std::ostream& out) const;
  static EpisodeStore read_jsonl(std::istream& in);

 private:
  std::vector<Episode> episodes_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::map<std::pair<KeyId, StageId>, std::vector<std::size_t>> by_group_;
  std::unordered_map<std::string, std::size_t> by_alert_;
};

struct AggregationConfig {
  SmoothingConfig smoothing;
  KeyMode mode = KeyMode::per_source_ip;
  const AsnTable* asn_table = nullptr;
};

/// Groups alerts per (key, stage) and segments each group in parallel.
EpisodeStore build_all_episodes(std::span<const Alert> alerts, const AggregationConfig& cfg);

/// Alerts bucketed by (key, stage), each bucket time-sorted (ties by id).
std::vector<std::pair<std::pair<KeyId, StageId>, std::vector<const Alert*>>> group_alerts(
    std::span<const Alert> alerts, const AggregationConfig& cfg);

}  // namespace heat
