#pragma once

#include <span>
#include <vector>

#include "heat/episode_store.hpp"
#include "heat/features.hpp"
#include "heat/heat_model.hpp"

// Serial, unoptimized versions of the parallel kernels. Used as test oracles
// and as the baseline in benchmarks.
namespace heat::reference {

/// One dense histogram per (key, stage) over its whole time span, no gap
/// splitting, processed serially.
EpisodeStore build_all_episodes(std::span<const Alert> alerts, const AggregationConfig& cfg);

std::vector<double> feature_matrix(const EpisodeStore& store, std::span<const EpisodePair> pairs,
                                   const StageVocabulary& vocab, const FeatureConfig& cfg = {});

std::vector<double> predict_batch(const HeatModel& model, const EpisodeStore& store,
                                  std::span<const EpisodePair> pairs);

/// Direct O(n·k) convolution without kernel caching.
std::vector<double> gaussian_smooth(std::span<const double> series, double sigma_bins, double truncation);

}  // namespace heat::reference
