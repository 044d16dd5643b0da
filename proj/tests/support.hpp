#pragma once

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "heat/corpus.hpp"
#include "heat/hac.hpp"
#include "heat/heat_model.hpp"
#include "heat/scenario.hpp"

namespace heat::test {

inline Alert make_alert(std::string id, double t, std::string src, std::string dst, std::string stage,
                        std::string signature = "sig", std::optional<int> port = std::nullopt) {
  Alert a;
  a.id = std::move(id);
  a.timestamp = t;
  a.src_ip = std::move(src);
  a.dst_ip = std::move(dst);
  a.stage = std::move(stage);
  a.signature = std::move(signature);
  a.category = "test";
  a.severity = 2;
  a.dst_port = port;
  return a;
}

inline AggregationConfig default_aggregation(const StageVocabulary& vocab) {
  AggregationConfig cfg;
  cfg.smoothing = SmoothingConfig::from_vocabulary(vocab);
  return cfg;
}

/// Desk-scale scenario, its IP-keyed corpus and a model trained on campaign 0.
struct DeskWorld {
  StageVocabulary vocab = default_vocabulary();
  Scenario scenario;
  Corpus corpus;
  std::unique_ptr<TruthIndex> truth;
  std::vector<LabeledPair> labels;
  HeatModel model;
};

inline const DeskWorld& desk_world(std::uint64_t seed) {
  static std::map<std::uint64_t, std::unique_ptr<DeskWorld>> cache;
  auto& slot = cache[seed];
  if (!slot) {
    slot = std::make_unique<DeskWorld>();
    auto& w = *slot;
    w.scenario = generate(ScenarioSpec::desk_scale(seed), w.vocab);
    w.corpus = make_corpus(w.scenario.alerts, w.vocab, default_aggregation(w.vocab));
    w.truth = std::make_unique<TruthIndex>(w.scenario.truth);
    w.labels = simulate_analyst_labels(w.corpus, *w.truth, w.scenario.campaigns[0].ioc_alert_id, kUnboundedLookback,
                                       20, seed);
    w.model = train(w.labels, w.corpus.store, w.vocab);
  }
  return *slot;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  static int counter = 0;
  auto dir = std::filesystem::temp_directory_path() /
             ("heat-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Writes the desk-scale scenario for `seed` (eve.json, truth.jsonl) into `dir`.
inline void write_desk_files(std::uint64_t seed, const std::filesystem::path& dir) {
  const auto& w = desk_world(seed);
  std::ofstream eve(dir / "eve.json");
  w.scenario.write_eve(eve);
  std::ofstream truth(dir / "truth.jsonl");
  w.scenario.write_truth(truth);
}

/// Bijective renaming of every address in the corpus into 172.16.0.0/12,
/// drawn from a seeded shuffle.
inline std::map<std::string, std::string> ip_renaming(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::string> ips;
  for (const auto& a : corpus.alerts) {
    ips.push_back(a.src_ip);
    ips.push_back(a.dst_ip);
  }
  std::sort(ips.begin(), ips.end());
  ips.erase(std::unique(ips.begin(), ips.end()), ips.end());
  std::vector<std::uint32_t> slots(ips.size());
  for (std::uint32_t i = 0; i < slots.size(); ++i) slots[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < ips.size(); ++i) {
    const std::uint32_t v = (172u << 24) | (16u << 16) | (slots[i] + 1);
    out[ips[i]] = std::to_string(v >> 24) + "." + std::to_string((v >> 16) & 255) + "." +
                  std::to_string((v >> 8) & 255) + "." + std::to_string(v & 255);
  }
  return out;
}

inline Episode renamed(Episode e, const std::map<std::string, std::string>& names) {
  auto apply = [&](std::vector<std::string>& v) {
    for (auto& ip : v) ip = names.at(ip);
    std::sort(v.begin(), v.end());
  };
  apply(e.sources);
  apply(e.targets);
  if (auto it = names.find(e.key); it != names.end()) e.key = it->second;
  e.episode_id = e.key + "|" + e.stage + "|" + e.episode_id.substr(e.episode_id.rfind('|') + 1);
  return e;
}

}  // namespace heat::test
