#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "heat/episode.hpp"
#include "heat/episode_store.hpp"
#include "heat/vocabulary.hpp"

namespace heat {

enum class OverlapMode {
  temporal_jaccard,  // |intersection| / |union| of the [start, end] intervals
  seconds,           // raw length of the intersection
};

struct FeatureConfig {
  OverlapMode overlap = OverlapMode::temporal_jaccard;
};

/// Network-agnostic relation between a prior episode e_p and a critical
/// episode e_c. Time differences are e_c minus e_p. Ratios are Jaccard
/// indices over the two sets.
struct PairFeatures {
  double interval_overlap = 0.0;
  double peak_diff = 0.0;
  double start_diff = 0.0;
  double end_diff = 0.0;
  double has_match_src = 0.0;
  double has_match_tgt = 0.0;
  double src_ratio = 0.0;
  double tgt_ratio = 0.0;
  double crit_src_as_tgt = 0.0;
  double crit_tgt_as_src = 0.0;
  std::vector<double> crit_ais_onehot;
  std::vector<double> prior_ais_onehot;
  double has_match_sig = 0.0;
  double sig_ratio = 0.0;
  double match_dst_port = 0.0;

  /// Flattened in column order; length 13 + 2·|stages|.
  std::vector<double> to_vector() const;
  void append_to(std::vector<double>& out) const;

  friend bool operator==(const PairFeatures&, const PairFeatures&) = default;
};

constexpr std::size_t feature_dimension(std::size_t stage_count) { return 13 + 2 * stage_count; }

/// Column names matching PairFeatures::to_vector order.
std::vector<std::string> feature_columns(const StageVocabulary& vocab);

/// Throws validation when an episode's stage is not in `vocab`.
PairFeatures extract_features(const Episode& prior, const Episode& critical,
                              const StageVocabulary& vocab, const FeatureConfig& cfg = {});

/// Size of the intersection of two sorted, unique ranges.
template <typename T>
std::size_t intersection_size(const std::vector<T>& a, const std::vector<T>& b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

/// Jaccard index of two sorted, unique ranges; 0 for two empty sets.
template <typename T>
double jaccard(const std::vector<T>& a, const std::vector<T>& b) {
  const std::size_t inter = intersection_size(a, b);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

struct EpisodePair {
  std::size_t prior = 0;
  std::size_t critical = 0;
};

/// Row-major feature matrix (pairs × dimension) over store indices, parallel over rows.
std::vector<double> feature_matrix(const EpisodeStore& store, std::span<const EpisodePair> pairs,
                                   const StageVocabulary& vocab, const FeatureConfig& cfg = {});

/// Zero-mean, unit-variance transform fit on training rows (population std).
/// Dimensions with zero spread are only centered.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  std::size_t dimension() const noexcept { return mean.size(); }
  bool passthrough(std::size_t dim) const { return !(stddev[dim] > 0.0); }

  std::vector<double> apply(std::span<const double> row) const;
  void apply_inplace(std::span<double> row) const;
  std::vector<double> apply(const PairFeatures& f) const { return apply(f.to_vector()); }

  nlohmann::json to_json() const;
  static Standardizer from_json(const nlohmann::json& j);
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

/// `rows` is row-major with `dimension` columns; needs at least two rows.
Standardizer fit_standardizer(std::span<const double> rows, std::size_t dimension);
Standardizer fit_standardizer(std::span<const PairFeatures> rows);

struct FeatureRow {
  std::string critical_episode_id;
  std::string prior_episode_id;
  std::vector<double> values;
  std::optional<int> heat;
};

/// CSV with a header row: critical_episode_id, prior_episode_id, feature columns, heat.
void write_feature_csv(std::ostream& out, const StageVocabulary& vocab, std::span<const FeatureRow> rows);

}  // namespace heat
