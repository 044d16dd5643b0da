#include "heat/episode_store.hpp"

#include <algorithm>
#include <istream>
#include <ostream>

#include "heat/error.hpp"
#include "heat/parallel.hpp"

namespace heat {

EpisodeStore::EpisodeStore(std::vector<Episode> episodes) : episodes_(std::move(episodes)) {
  std::sort(episodes_.begin(), episodes_.end(), [](const Episode& a, const Episode& b) {
    if (a.peak_time != b.peak_time) return a.peak_time < b.peak_time;
    return a.episode_id < b.episode_id;
  });
  for (std::size_t i = 0; i < episodes_.size(); ++i) {
    const auto& e = episodes_[i];
    if (!by_id_.emplace(e.episode_id, i).second) fail(ErrorKind::data, "duplicate episode id " + e.episode_id);
    by_group_[{e.key, e.stage}].push_back(i);
    for (const auto& id : e.alert_ids) {
      if (!by_alert_.emplace(id, i).second) {
        fail(ErrorKind::data, "alert " + id + " belongs to more than one episode");
      }
    }
  }
}

std::optional<std::size_t> EpisodeStore::index_of(const std::string& episode_id) const {
  auto it = by_id_.find(episode_id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Episode* EpisodeStore::find(const std::string& episode_id) const {
  auto idx = index_of(episode_id);
  return idx ? &episodes_[*idx] : nullptr;
}

const Episode& EpisodeStore::at(const std::string& episode_id) const {
  const Episode* e = find(episode_id);
  if (e == nullptr) fail(ErrorKind::not_found, "unknown episode " + episode_id, "episode_id");
  return *e;
}

std::optional<std::size_t> EpisodeStore::episode_of_alert(const std::string& alert_id) const {
  auto it = by_alert_.find(alert_id);
  if (it == by_alert_.end()) return std::nullopt;
  return it->second;
}

const std::vector<std::size_t>& EpisodeStore::group(const KeyId& key, const StageId& stage) const {
  static const std::vector<std::size_t> kEmpty;
  auto it = by_group_.find({key, stage});
  return it == by_group_.end() ? kEmpty : it->second;
}

std::pair<std::size_t, std::size_t> EpisodeStore::peak_range(double from, double to) const {
  auto lo = std::lower_bound(episodes_.begin(), episodes_.end(), from,
                             [](const Episode& e, double t) { return e.peak_time < t; });
  auto hi = std::lower_bound(lo, episodes_.end(), to, [](const Episode& e, double t) { return e.peak_time < t; });
  return {static_cast<std::size_t>(lo - episodes_.begin()), static_cast<std::size_t>(hi - episodes_.begin())};
}

void EpisodeStore::write_jsonl(std::ostream& out) const {
  for (const auto& e : episodes_) out << to_json(e).dump() << '\n';
}

EpisodeStore EpisodeStore::read_jsonl(std::istream& in) {
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      episodes.push_back(episode_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::data, "episode line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return EpisodeStore(std::move(episodes));
}

std::vector<std::pair<std::pair<KeyId, StageId>, std::vector<const Alert*>>> group_alerts(
    std::span<const Alert> alerts, const AggregationConfig& cfg) {
  std::map<std::pair<KeyId, StageId>, std::vector<const Alert*>> groups;
  for (const Alert& a : alerts) {
    groups[{resolve_aggregation_key(a, cfg.mode, cfg.asn_table), a.stage}].push_back(&a);
  }
  std::vector<std::pair<std::pair<KeyId, StageId>, std::vector<const Alert*>>> out(
      std::make_move_iterator(groups.begin()), std::make_move_iterator(groups.end()));
  for (auto& [key, members] : out) {
    std::sort(members.begin(), members.end(), [](const Alert* a, const Alert* b) {
      if (a->timestamp != b->timestamp) return a->timestamp < b->timestamp;
      return a->id < b->id;
    });
  }
  return out;
}

EpisodeStore build_all_episodes(std::span<const Alert> alerts, const AggregationConfig& cfg) {
  cfg.smoothing.validate();
  const auto groups = group_alerts(alerts, cfg);
  std::vector<std::vector<Episode>> per_group(groups.size());
  parallel_for(groups.size(), [&](std::size_t g) {
    const auto& [group_key, members] = groups[g];
    per_group[g] = episodes_for_group(members, group_key.first, group_key.second, cfg.smoothing);
  });
  std::vector<Episode> all;
  for (auto& eps : per_group) {
    for (auto& e : eps) all.push_back(std::move(e));
  }
  return EpisodeStore(std::move(all));
}

}  // namespace heat
