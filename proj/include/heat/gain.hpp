#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "heat/hac.hpp"

namespace heat {

/// Shannon entropy of non-negative symbol weights in log base `base`.
/// Zero weights contribute nothing; an all-zero distribution has entropy 0.
double entropy(std::span<const double> counts, double base);

/// (stage index, quantized heat 0..3).
using StageHeat = std::pair<std::size_t, int>;

/// Plug-in H(A|Y) over empirical joint counts. Throws on empty input.
double conditional_entropy(std::span<const StageHeat> pairs, double base);

/// Round half up, clamped to 0..3.
int quantize_heat(double heat);

struct GainConfig {
  bool include_critical = true;    // critical episode counts as part of A_h / E_d
  bool extended_nrg_base = false;  // log base |stages|+1 for the filtered-noise distribution
};

struct GainReport {
  double acg = 0.0;
  double nrg = 0.0;
  double coh = 0.0;
  double gain = 0.0;
  std::size_t hac_size = 0;
  std::size_t window_size = 0;
  std::size_t filtered = 0;
  bool partial = false;  // no training labels, coherence not computed

  nlohmann::json to_json() const;
};

/// Stage/heat pairs of a model's training labels (E_t).
std::vector<StageHeat> training_stage_heats(const HeatModel& model);

/// Coverage, noise-reduction and coherence gains of `hac` against its window
/// (E_d) and the training labels (E_t); gain = acg + nrg - coh.
GainReport compute_gain(const Hac& hac, const EpisodeStore& store, std::span<const StageHeat> training,
                        const StageVocabulary& vocab, const GainConfig& cfg = {});

struct RankConfig {
  double lookback_seconds = std::numeric_limits<double>::infinity();
  double threshold = 0.5;
  double acg_min = 0.4;
  GainConfig gain;
};

struct RankedIoc {
  Ioc ioc;
  GainReport report;
};

/// HAC + gain for each IoC, filtered to acg ≥ acg_min, sorted by gain
/// descending, then IoC timestamp, then alert id.
std::vector<RankedIoc> rank_iocs(std::span<const Ioc> iocs, const HeatModel& model, const Corpus& corpus,
                                 const RankConfig& cfg);

nlohmann::json to_json(const RankedIoc& r);
void write_ranking_csv(std::ostream& out, std::span<const RankedIoc> ranking);

}  // namespace heat
