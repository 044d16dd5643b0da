#include "heat/gain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

#include "heat/error.hpp"

namespace heat {

double entropy(std::span<const double> counts, double base) {
  if (!(base > 1.0)) fail(ErrorKind::validation, "entropy base must be > 1");
  // Group equal weights so a uniform distribution over m symbols yields log(m) exactly.
  std::map<double, std::size_t> groups;
  double total = 0.0;
  for (double c : counts) {
    if (c < 0.0 || !std::isfinite(c)) fail(ErrorKind::validation, "entropy weights must be finite and >= 0");
    if (c > 0.0) {
      ++groups[c];
      total += c;
    }
  }
  if (groups.empty()) return 0.0;
  if (groups.size() == 1) return std::log(static_cast<double>(groups.begin()->second)) / std::log(base);
  const double log_total = std::log(total);
  double h = 0.0;
  for (const auto& [c, m] : groups) h += static_cast<double>(m) * c / total * (log_total - std::log(c));
  return h / std::log(base);
}

double conditional_entropy(std::span<const StageHeat> pairs, double base) {
  if (pairs.empty()) fail(ErrorKind::validation, "conditional entropy of an empty sample");
  if (!(base > 1.0)) fail(ErrorKind::validation, "entropy base must be > 1");
  std::map<int, std::map<std::size_t, double>> joint;
  for (const auto& [stage, y] : pairs) joint[y][stage] += 1.0;
  const double n = static_cast<double>(pairs.size());
  double h = 0.0;
  for (const auto& [y, stages] : joint) {
    std::vector<double> counts;
    double ny = 0.0;
    for (const auto& [stage, c] : stages) {
      counts.push_back(c);
      ny += c;
    }
    h += ny / n * entropy(counts, base);
  }
  return h;
}

int quantize_heat(double heat) {
  if (std::isnan(heat)) return 0;
  return static_cast<int>(std::clamp(std::floor(heat + 0.5), 0.0, kMaxHeat));
}

nlohmann::json GainReport::to_json() const {
  return {{"acg", acg},           {"nrg", nrg},
          {"coh", coh},           {"gain", gain},
          {"hac_size", hac_size}, {"window_size", window_size},
          {"filtered", filtered}, {"partial", partial}};
}

std::vector<StageHeat> training_stage_heats(const HeatModel& model) {
  std::vector<StageHeat> out;
  out.reserve(model.training.size());
  for (const auto& e : model.training) out.emplace_back(model.vocab.require_index(e.prior_stage), e.label.heat);
  return out;
}

GainReport compute_gain(const Hac& hac, const EpisodeStore& store, std::span<const StageHeat> training,
                        const StageVocabulary& vocab, const GainConfig& cfg) {
  const std::size_t n = vocab.size();
  const double base = static_cast<double>(n);

  std::vector<std::size_t> window = hac.window;
  std::sort(window.begin(), window.end());
  for (const auto& h : hac.heated) {
    if (!std::binary_search(window.begin(), window.end(), h.index)) {
      fail(ErrorKind::internal, "HAC episode outside its window");
    }
  }

  std::vector<double> hac_counts(n, 0.0);
  std::vector<double> data_counts(n, 0.0);
  std::vector<StageHeat> hac_pairs;
  for (const auto& h : hac.heated) {
    const std::size_t s = vocab.require_index(store[h.index].stage);
    hac_counts[s] += 1.0;
    hac_pairs.emplace_back(s, quantize_heat(h.heat));
  }
  for (std::size_t idx : window) data_counts[vocab.require_index(store[idx].stage)] += 1.0;
  if (cfg.include_critical) {
    const std::size_t s = vocab.require_index(store[hac.critical_index].stage);
    hac_counts[s] += 1.0;
    data_counts[s] += 1.0;
    hac_pairs.emplace_back(s, static_cast<int>(kMaxHeat));
  }

  GainReport r;
  r.hac_size = hac.heated.size();
  r.window_size = hac.window.size();
  r.filtered = hac.window.size() - hac.heated.size();

  r.acg = entropy(hac_counts, base);
  std::vector<double> reduced = hac_counts;
  reduced.push_back(static_cast<double>(r.filtered));
  r.nrg = entropy(data_counts, base) - entropy(reduced, cfg.extended_nrg_base ? base + 1.0 : base);
  if (training.empty()) {
    r.partial = true;
    r.coh = 0.0;
  } else {
    const double h_hac = hac_pairs.empty() ? 0.0 : conditional_entropy(hac_pairs, base);
    r.coh = std::abs(h_hac - conditional_entropy(training, base));
  }
  r.gain = r.acg + r.nrg - r.coh;
  return r;
}

std::vector<RankedIoc> rank_iocs(std::span<const Ioc> iocs, const HeatModel& model, const Corpus& corpus,
                                 const RankConfig& cfg) {
  const auto training = training_stage_heats(model);
  std::vector<RankedIoc> out;
  for (const auto& ioc : iocs) {
    const Hac hac = extract_hac(ioc, model, corpus, cfg.lookback_seconds, cfg.threshold);
    GainReport report = compute_gain(hac, corpus.store, training, model.vocab, cfg.gain);
    if (report.acg >= cfg.acg_min) out.push_back({ioc, report});
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedIoc& a, const RankedIoc& b) {
    if (a.report.gain != b.report.gain) return a.report.gain > b.report.gain;
    if (a.ioc.timestamp != b.ioc.timestamp) return a.ioc.timestamp < b.ioc.timestamp;
    return a.ioc.critical_alert_id < b.ioc.critical_alert_id;
  });
  return out;
}

nlohmann::json to_json(const RankedIoc& r) {
  auto j = r.report.to_json();
  j["ioc"] = to_json(r.ioc);
  return j;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_ranking_csv(std::ostream& out, std::span<const RankedIoc> ranking) {
  out << "ioc_id,signature,gain,acg,nrg,coh,hac_size,window_size\n";
  for (const auto& r : ranking) {
    out << csv_field(r.ioc.critical_alert_id) << ',' << csv_field(r.ioc.signature) << ',' << number(r.report.gain)
        << ',' << number(r.report.acg) << ',' << number(r.report.nrg) << ',' << number(r.report.coh) << ','
        << r.report.hac_size << ',' << r.report.window_size << '\n';
  }
}

}  // namespace heat
