#include "heat/reference.hpp"

#include <cmath>

namespace heat::reference {

std::vector<double> gaussian_smooth(std::span<const double> series, double sigma_bins, double truncation) {
  const auto radius = static_cast<long>(std::floor(truncation * sigma_bins));
  double norm = 0.0;
  for (long k = -radius; k <= radius; ++k) norm += std::exp(-0.5 * (k / sigma_bins) * (k / sigma_bins));
  std::vector<double> out(series.size(), 0.0);
  const long n = static_cast<long>(series.size());
  for (long i = 0; i < n; ++i) {
    double acc = 0.0;
    for (long k = -radius; k <= radius; ++k) {
      const long j = i + k;
      if (j < 0 || j >= n) continue;
      acc += series[j] * std::exp(-0.5 * (k / sigma_bins) * (k / sigma_bins)) / norm;
    }
    out[i] = acc;
  }
  return out;
}

EpisodeStore build_all_episodes(std::span<const Alert> alerts, const AggregationConfig& cfg) {
  std::vector<Episode> all;
  for (const auto& [group_key, members] : group_alerts(alerts, cfg)) {
    const auto& [key, stage] = group_key;
    const Histogram h = build_histogram(members, cfg.smoothing.bin_width);
    const auto smoothed = heat::gaussian_smooth(h.counts, cfg.smoothing.sigma_for(stage) / cfg.smoothing.bin_width,
                                                cfg.smoothing.truncation);
    for (auto& e : segment_episodes(h, smoothed, members, key, stage)) all.push_back(std::move(e));
  }
  return EpisodeStore(std::move(all));
}

std::vector<double> feature_matrix(const EpisodeStore& store, std::span<const EpisodePair> pairs,
                                   const StageVocabulary& vocab, const FeatureConfig& cfg) {
  std::vector<double> out;
  out.reserve(pairs.size() * feature_dimension(vocab.size()));
  for (const auto& p : pairs) extract_features(store[p.prior], store[p.critical], vocab, cfg).append_to(out);
  return out;
}

std::vector<double> predict_batch(const HeatModel& model, const EpisodeStore& store,
                                  std::span<const EpisodePair> pairs) {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(predict(model, store[p.prior], store[p.critical]));
  return out;
}

}  // namespace heat::reference
