#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "heat/aggregation_key.hpp"
#include "heat/alert.hpp"
#include "heat/vocabulary.hpp"

namespace heat {

/// Alerts from one aggregation key and one stage between two minima of the
/// smoothed volume curve. Set-valued attributes are sorted and unique.
struct Episode {
  std::string episode_id;
  KeyId key;
  StageId stage;
  double peak_time = 0.0;
  double start_time = 0.0;
  double end_time = 0.0;
  std::vector<std::string> sources;
  std::vector<std::string> targets;
  std::vector<std::string> signatures;
  std::vector<int> dst_ports;
  std::vector<std::string> alert_ids;
  std::size_t alert_count = 0;

  friend bool operator==(const Episode&, const Episode&) = default;
};

nlohmann::json to_json(const Episode& e);
Episode episode_from_json(const nlohmann::json& j);

struct SmoothingConfig {
  double bin_width = 60.0;
  double truncation = 3.0;  // kernel half-width in sigmas
  std::unordered_map<StageId, double> sigma_seconds;

  /// Per-stage sigma from the vocabulary's smoothing durations.
  static SmoothingConfig from_vocabulary(const StageVocabulary& vocab, double bin_width = 60.0,
                                         double truncation = 3.0);
  double sigma_for(const StageId& stage) const;
  void validate() const;
};

/// Alert counts in contiguous bins starting at floor(min timestamp).
struct Histogram {
  double origin = 0.0;
  double bin_width = 60.0;
  std::vector<double> counts;

  std::size_t bin_of(double timestamp) const;
  double bin_center(std::size_t bin) const { return origin + (static_cast<double>(bin) + 0.5) * bin_width; }
};

/// `alerts` must already be filtered to one (key, stage); throws when empty.
Histogram build_histogram(std::span<const Alert* const> alerts, double bin_width);

/// Discrete convolution with a Gaussian kernel truncated at
/// ±floor(truncation·sigma_bins) and renormalized; zero padding at the edges.
std::vector<double> gaussian_smooth(std::span<const double> series, double sigma_bins,
                                    double truncation = 3.0);

/// Normalized truncated kernel, index 0 at -radius.
std::vector<double> gaussian_kernel(double sigma_bins, double truncation);

/// Indices of local maxima: s[i] > s[i-1] and s[i] >= s[i+1], with
/// out-of-range neighbours treated as -inf.
std::vector<std::size_t> find_peaks(std::span<const double> smoothed);

/// Splits the bins at the lowest point between consecutive peaks and groups
/// `alerts` (time-sorted, same key and stage) into one episode per peak.
/// A boundary bin belongs to the earlier episode.
std::vector<Episode> segment_episodes(const Histogram& raw, std::span<const double> smoothed,
                                      std::span<const Alert* const> alerts, const KeyId& key,
                                      const StageId& stage);

/// Histogram → smoothing → segmentation for one (key, stage) group.
std::vector<Episode> episodes_for_group(std::span<const Alert* const> alerts, const KeyId& key,
                                        const StageId& stage, const SmoothingConfig& cfg);

}  // namespace heat
