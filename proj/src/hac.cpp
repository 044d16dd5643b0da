#include "heat/hac.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_set>

#include "heat/error.hpp"
#include "heat/parallel.hpp"

namespace heat {

namespace {

// Timestamps are kept at microsecond resolution.
constexpr double kTimestampTolerance = 5e-7;

Ioc make_ioc(const Alert& alert, const Corpus& corpus) {
  const auto idx = corpus.store.episode_of_alert(alert.id);
  if (!idx) fail(ErrorKind::internal, "alert " + alert.id + " is not assigned to any episode");
  return {alert.id, corpus.store[*idx].episode_id, alert.timestamp, alert.signature};
}

std::size_t critical_index_of(const Ioc& ioc, const EpisodeStore& store) {
  const auto idx = store.index_of(ioc.critical_episode_id);
  if (!idx) fail(ErrorKind::not_found, "unknown critical episode " + ioc.critical_episode_id, "ioc");
  return *idx;
}

nlohmann::json lookback_json(double lookback) {
  return std::isfinite(lookback) ? nlohmann::json(lookback) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const Ioc& ioc) {
  return {{"critical_alert_id", ioc.critical_alert_id},
          {"critical_episode_id", ioc.critical_episode_id},
          {"timestamp", ioc.timestamp},
          {"signature", ioc.signature}};
}

Ioc resolve_ioc(const std::string& alert_id, const Corpus& corpus) {
  const Alert* alert = corpus.find_alert(alert_id);
  if (alert == nullptr) fail(ErrorKind::not_found, "unknown alert " + alert_id, "ioc");
  return make_ioc(*alert, corpus);
}

Ioc resolve_ioc(const IocQuery& query, const Corpus& corpus) {
  if (query.alert_id) return resolve_ioc(*query.alert_id, corpus);
  if (!query.signature || !query.timestamp) {
    fail(ErrorKind::validation, "an IoC needs an alert id or a signature and timestamp", "ioc");
  }
  std::vector<const Alert*> matches;
  for (const auto& a : corpus.alerts) {
    if (a.signature != *query.signature) continue;
    if (std::abs(a.timestamp - *query.timestamp) > kTimestampTolerance) continue;
    if (query.src_ip && a.src_ip != *query.src_ip) continue;
    if (query.dst_ip && a.dst_ip != *query.dst_ip) continue;
    matches.push_back(&a);
  }
  if (matches.empty()) fail(ErrorKind::not_found, "no alert matches the IoC query", "ioc");
  if (matches.size() > 1) {
    std::string ids;
    for (std::size_t i = 0; i < matches.size() && i < 10; ++i) ids += (i ? ", " : "") + matches[i]->id;
    if (matches.size() > 10) ids += ", ...";
    fail(ErrorKind::validation,
         "IoC query is ambiguous: " + std::to_string(matches.size()) + " alerts match (" + ids + ")", "ioc");
  }
  return make_ioc(*matches.front(), corpus);
}

std::vector<Ioc> candidate_iocs(const Corpus& corpus, std::string_view signature_filter, int max_severity) {
  std::vector<const Alert*> matching;
  for (const auto& a : corpus.alerts) {
    if (a.severity > max_severity) continue;
    if (!signature_filter.empty() && a.signature.find(signature_filter) == std::string::npos) continue;
    matching.push_back(&a);
  }
  std::sort(matching.begin(), matching.end(), [](const Alert* x, const Alert* y) {
    return x->timestamp != y->timestamp ? x->timestamp < y->timestamp : x->id < y->id;
  });
  std::unordered_set<std::size_t> seen;
  std::vector<Ioc> out;
  for (const Alert* a : matching) {
    const auto idx = corpus.store.episode_of_alert(a->id);
    if (!idx || !seen.insert(*idx).second) continue;
    out.push_back({a->id, corpus.store[*idx].episode_id, a->timestamp, a->signature});
  }
  return out;
}

HacMethod parse_hac_method(std::string_view text) {
  if (text == "heat" || text == "heat-model" || text == "heat_model") return HacMethod::heat_model;
  if (text == "src-match" || text == "src_match") return HacMethod::src_match;
  if (text == "tgt-match" || text == "tgt_match") return HacMethod::tgt_match;
  if (text == "src-and-tgt-match" || text == "src_and_tgt_match") return HacMethod::src_and_tgt_match;
  fail(ErrorKind::validation, "unknown HAC method '" + std::string(text) + "'", "method");
}

const char* to_string(HacMethod method) {
  switch (method) {
    case HacMethod::heat_model: return "heat-model";
    case HacMethod::src_match: return "src-match";
    case HacMethod::tgt_match: return "tgt-match";
    case HacMethod::src_and_tgt_match: return "src-and-tgt-match";
  }
  return "?";
}

std::vector<std::size_t> prior_window(const EpisodeStore& store, std::size_t critical_index,
                                      double lookback_seconds) {
  if (!(lookback_seconds >= 0.0)) fail(ErrorKind::validation, "lookback must be >= 0", "lookback");
  const double peak = store[critical_index].peak_time;
  const auto [lo, hi] = store.peak_range(peak - lookback_seconds, peak);
  std::vector<std::size_t> out(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) out[i - lo] = i;
  return out;
}

Hac extract_hac(const Ioc& ioc, const HeatModel& model, const Corpus& corpus, double lookback_seconds,
                double threshold) {
  if (!(threshold >= 0.0)) fail(ErrorKind::validation, "threshold must be >= 0", "threshold");
  Hac hac;
  hac.ioc = ioc;
  hac.critical_index = critical_index_of(ioc, corpus.store);
  hac.method = HacMethod::heat_model;
  hac.lookback_seconds = lookback_seconds;
  hac.threshold = threshold;
  hac.window = prior_window(corpus.store, hac.critical_index, lookback_seconds);

  std::vector<EpisodePair> pairs;
  pairs.reserve(hac.window.size());
  for (std::size_t idx : hac.window) pairs.push_back({idx, hac.critical_index});
  const auto heats = predict_batch(model, corpus.store, pairs);
  for (std::size_t i = 0; i < heats.size(); ++i) {
    if (heats[i] > threshold) hac.heated.push_back({hac.window[i], heats[i]});
  }
  return hac;
}

Hac extract_baseline(const Ioc& ioc, const Corpus& corpus, HacMethod method, double lookback_seconds) {
  if (method == HacMethod::heat_model) fail(ErrorKind::validation, "heat-model is not a baseline method", "method");
  Hac hac;
  hac.ioc = ioc;
  hac.critical_index = critical_index_of(ioc, corpus.store);
  hac.method = method;
  hac.lookback_seconds = lookback_seconds;
  hac.threshold = 0.0;
  hac.window = prior_window(corpus.store, hac.critical_index, lookback_seconds);
  const Episode& critical = corpus.store[hac.critical_index];
  for (std::size_t idx : hac.window) {
    const Episode& e = corpus.store[idx];
    const bool src = intersection_size(e.sources, critical.sources) > 0;
    const bool tgt = intersection_size(e.targets, critical.targets) > 0;
    const bool keep = method == HacMethod::src_match   ? src
                      : method == HacMethod::tgt_match ? tgt
                                                       : src && tgt;
    if (keep) hac.heated.push_back({idx, kMaxHeat});
  }
  return hac;
}

nlohmann::json to_json(const Hac& hac, const EpisodeStore& store) {
  nlohmann::json episodes = nlohmann::json::array();
  for (const auto& h : hac.heated) {
    const Episode& e = store[h.index];
    episodes.push_back({{"episode_id", e.episode_id},
                        {"heat", h.heat},
                        {"stage", e.stage},
                        {"peak_time", e.peak_time},
                        {"alert_count", e.alert_count},
                        {"sources", e.sources},
                        {"targets", e.targets},
                        {"signatures", e.signatures}});
  }
  const Episode& c = store[hac.critical_index];
  return {{"ioc", to_json(hac.ioc)},
          {"method", to_string(hac.method)},
          {"threshold", hac.threshold},
          {"lookback", lookback_json(hac.lookback_seconds)},
          {"critical_episode",
           {{"episode_id", c.episode_id},
            {"stage", c.stage},
            {"peak_time", c.peak_time},
            {"alert_count", c.alert_count},
            {"sources", c.sources},
            {"targets", c.targets},
            {"signatures", c.signatures}}},
          {"window_size", hac.window.size()},
          {"episodes", std::move(episodes)}};
}

}  // namespace heat
