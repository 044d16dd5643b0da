#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "heat/alert.hpp"
#include "heat/episode_store.hpp"
#include "heat/vocabulary.hpp"

namespace heat {

/// Ingested alerts plus their episodes. Immutable once built.
struct Corpus {
  StageVocabulary vocab;
  std::vector<Alert> alerts;
  std::unordered_map<std::string, std::size_t> alert_index;
  EpisodeStore store;

  const Alert* find_alert(const std::string& id) const;
};

Corpus make_corpus(std::vector<Alert> alerts, StageVocabulary vocab, const AggregationConfig& cfg);

}  // namespace heat
