#include "heat/corpus.hpp"

#include "heat/error.hpp"

namespace heat {

const Alert* Corpus::find_alert(const std::string& id) const {
  auto it = alert_index.find(id);
  return it == alert_index.end() ? nullptr : &alerts[it->second];
}

Corpus make_corpus(std::vector<Alert> alerts, StageVocabulary vocab, const AggregationConfig& cfg) {
  Corpus c;
  c.vocab = std::move(vocab);
  c.alerts = std::move(alerts);
  for (std::size_t i = 0; i < c.alerts.size(); ++i) {
    if (!c.vocab.contains(c.alerts[i].stage)) {
      fail(ErrorKind::validation, "alert " + c.alerts[i].id + " has stage outside the vocabulary", "stage");
    }
    if (!c.alert_index.emplace(c.alerts[i].id, i).second) {
      fail(ErrorKind::data, "duplicate alert id " + c.alerts[i].id);
    }
  }
  c.store = build_all_episodes(c.alerts, cfg);
  return c;
}

}  // namespace heat
