#include <algorithm>
#include <cmath>
#include <limits>

#include "heat/episode.hpp"
#include "heat/error.hpp"

namespace heat {

nlohmann::json to_json(const Episode& e) {
  return {{"episode_id", e.episode_id}, {"key", e.key},           {"stage", e.stage},
          {"peak_time", e.peak_time},   {"start_time", e.start_time}, {"end_time", e.end_time},
          {"sources", e.sources},       {"targets", e.targets},   {"signatures", e.signatures},
          {"dst_ports", e.dst_ports},   {"alert_ids", e.alert_ids}, {"alert_count", e.alert_count}};
}

Episode episode_from_json(const nlohmann::json& j) {
  Episode e;
  e.episode_id = j.at("episode_id").get<std::string>();
  e.key = j.at("key").get<std::string>();
  e.stage = j.at("stage").get<std::string>();
  e.peak_time = j.at("peak_time").get<double>();
  e.start_time = j.at("start_time").get<double>();
  e.end_time = j.at("end_time").get<double>();
  e.sources = j.at("sources").get<std::vector<std::string>>();
  e.targets = j.at("targets").get<std::vector<std::string>>();
  e.signatures = j.at("signatures").get<std::vector<std::string>>();
  e.dst_ports = j.at("dst_ports").get<std::vector<int>>();
  e.alert_ids = j.at("alert_ids").get<std::vector<std::string>>();
  e.alert_count = j.at("alert_count").get<std::size_t>();
  if (e.alert_count != e.alert_ids.size() || e.alert_count == 0) {
    fail(ErrorKind::data, "episode " + e.episode_id + ": alert_count does not match alert_ids");
  }
  if (!(e.start_time <= e.peak_time && e.peak_time <= e.end_time)) {
    fail(ErrorKind::data, "episode " + e.episode_id + ": times out of order");
  }
  return e;
}

SmoothingConfig SmoothingConfig::from_vocabulary(const StageVocabulary& vocab, double bin_width, double truncation) {
  SmoothingConfig cfg;
  cfg.bin_width = bin_width;
  cfg.truncation = truncation;
  for (const auto& s : vocab.stages()) cfg.sigma_seconds[s.stage_id] = s.smoothing_seconds;
  cfg.validate();
  return cfg;
}

double SmoothingConfig::sigma_for(const StageId& stage) const {
  auto it = sigma_seconds.find(stage);
  if (it == sigma_seconds.end()) fail(ErrorKind::validation, "no smoothing sigma for stage " + stage, "stage");
  return it->second;
}

void SmoothingConfig::validate() const {
  if (!(bin_width > 0.0)) fail(ErrorKind::validation, "bin_width must be > 0", "bin_width");
  if (!(truncation >= 1.0)) fail(ErrorKind::validation, "truncation must be >= 1", "truncation");
  for (const auto& [stage, sigma] : sigma_seconds) {
    if (!(sigma > 0.0)) fail(ErrorKind::validation, "sigma must be > 0 for stage " + stage, "sigma");
  }
}

namespace {

template <typename T>
void sort_unique(std::vector<T>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

Episode make_episode(std::span<const Alert* const> members, const Histogram& raw, std::size_t first_bin,
                     std::size_t last_bin, const KeyId& key, const StageId& stage, std::size_t ordinal) {
  Episode e;
  e.episode_id = key + "|" + stage + "|" + std::to_string(ordinal);
  e.key = key;
  e.stage = stage;
  e.start_time = std::numeric_limits<double>::infinity();
  e.end_time = -e.start_time;
  for (const Alert* a : members) {
    e.start_time = std::min(e.start_time, a->timestamp);
    e.end_time = std::max(e.end_time, a->timestamp);
    e.sources.push_back(a->src_ip);
    e.targets.push_back(a->dst_ip);
    e.signatures.push_back(a->signature);
    if (a->dst_port) e.dst_ports.push_back(*a->dst_port);
    e.alert_ids.push_back(a->id);
  }
  sort_unique(e.sources);
  sort_unique(e.targets);
  sort_unique(e.signatures);
  sort_unique(e.dst_ports);
  std::sort(e.alert_ids.begin(), e.alert_ids.end());
  e.alert_count = e.alert_ids.size();

  std::size_t best = first_bin;
  for (std::size_t b = first_bin; b <= last_bin; ++b) {
    if (raw.counts[b] > raw.counts[best]) best = b;
  }
  // A bin centre can fall outside the member span; keep start <= peak <= end.
  e.peak_time = std::clamp(raw.bin_center(best), e.start_time, e.end_time);
  return e;
}

}  // namespace

std::vector<Episode> segment_episodes(const Histogram& raw, std::span<const double> smoothed,
                                      std::span<const Alert* const> alerts, const KeyId& key,
                                      const StageId& stage) {
  if (smoothed.size() != raw.counts.size()) {
    fail(ErrorKind::validation, "raw and smoothed series differ in length");
  }
  std::vector<Episode> out;
  if (alerts.empty()) return out;
  const auto peaks = find_peaks(smoothed);

  // Last bin of each segment: the lowest point between consecutive peaks
  // (leftmost on ties), then the end of the series.
  std::vector<std::size_t> ends;
  for (std::size_t k = 0; k + 1 < peaks.size(); ++k) {
    std::size_t lowest = peaks[k] + 1;
    for (std::size_t b = lowest + 1; b < peaks[k + 1]; ++b) {
      if (smoothed[b] < smoothed[lowest]) lowest = b;
    }
    ends.push_back(lowest);
  }
  ends.push_back(smoothed.size() - 1);

  std::size_t next_alert = 0;
  std::size_t first_bin = 0;
  for (std::size_t end_bin : ends) {
    const std::size_t begin_alert = next_alert;
    while (next_alert < alerts.size() && raw.bin_of(alerts[next_alert]->timestamp) <= end_bin) ++next_alert;
    if (next_alert > begin_alert) {
      out.push_back(make_episode(alerts.subspan(begin_alert, next_alert - begin_alert), raw, first_bin, end_bin,
                                 key, stage, out.size()));
    }
    first_bin = end_bin + 1;
  }
  return out;
}

std::vector<Episode> episodes_for_group(std::span<const Alert* const> alerts, const KeyId& key,
                                        const StageId& stage, const SmoothingConfig& cfg) {
  if (alerts.empty()) fail(ErrorKind::validation, "no alerts for key/stage");
  const double sigma_bins = cfg.sigma_for(stage) / cfg.bin_width;
  const auto radius = static_cast<std::size_t>(std::floor(cfg.truncation * sigma_bins));
  const double grid_origin = std::floor(alerts.front()->timestamp);

  // Runs of alerts separated by more than 2·radius+1 empty bins cannot
  // influence each other's smoothed values, so each run is segmented on its
  // own slice of the common bin grid. Numbering continues across runs.
  std::vector<Episode> out;
  std::size_t run_begin = 0;
  auto grid_bin = [&](const Alert* a) {
    return static_cast<std::size_t>(std::floor((a->timestamp - grid_origin) / cfg.bin_width));
  };
  while (run_begin < alerts.size()) {
    std::size_t run_end = run_begin + 1;
    while (run_end < alerts.size() && grid_bin(alerts[run_end]) - grid_bin(alerts[run_end - 1]) <= 2 * radius + 1) {
      ++run_end;
    }
    const auto run = alerts.subspan(run_begin, run_end - run_begin);
    Histogram h;
    h.bin_width = cfg.bin_width;
    const std::size_t first = grid_bin(run.front());
    h.origin = grid_origin + static_cast<double>(first) * cfg.bin_width;
    h.counts.assign(grid_bin(run.back()) - first + 1, 0.0);
    for (const Alert* a : run) h.counts[h.bin_of(a->timestamp)] += 1.0;

    const auto smoothed = gaussian_smooth(h.counts, sigma_bins, cfg.truncation);
    auto episodes = segment_episodes(h, smoothed, run, key, stage);
    for (auto& e : episodes) {
      e.episode_id = key + "|" + stage + "|" + std::to_string(out.size());
      out.push_back(std::move(e));
    }
    run_begin = run_end;
  }
  return out;
}

}  // namespace heat
