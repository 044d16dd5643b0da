#include <doctest.h>

#include <set>
#include <sstream>

#include "heat/aggregation_key.hpp"
#include "heat/error.hpp"
#include "support.hpp"

using namespace heat;

TEST_CASE("generation is deterministic in the seed") {
  const auto vocab = default_vocabulary();
  const auto a = generate(ScenarioSpec::desk_scale(4), vocab);
  const auto b = generate(ScenarioSpec::desk_scale(4), vocab);
  const auto c = generate(ScenarioSpec::desk_scale(5), vocab);
  CHECK(a.alerts == b.alerts);
  CHECK(a.alerts != c.alerts);
}

TEST_CASE("desk-scale shape") {
  const auto& w = test::desk_world(1);
  const auto& s = w.scenario;
  CHECK(s.alerts.size() > 15000);
  CHECK(s.alerts.size() < 25000);
  REQUIRE(s.campaigns.size() == 3);
  REQUIRE(s.truth.size() == s.alerts.size());
  std::size_t planted = 0;
  std::set<std::string> ids;
  const auto mapping = default_mapping(w.vocab);
  for (std::size_t i = 0; i < s.alerts.size(); ++i) {
    const auto& a = s.alerts[i];
    CHECK(ids.insert(a.id).second);
    CHECK(s.truth[i].alert_id == a.id);
    CHECK(s.truth[i].stage == a.stage);
    CHECK(map_signature(a.signature, a.signature_id, a.category, mapping) == a.stage);
    if (i) CHECK(s.alerts[i - 1].timestamp <= a.timestamp);
    if (s.truth[i].campaign_id && s.truth[i].truth_heat > 0) ++planted;
  }
  const double noise = 1.0 - static_cast<double>(planted) / static_cast<double>(s.alerts.size());
  CHECK(noise > 0.9);
  CHECK(noise < 0.99);
  const TruthIndex truth(s.truth);
  for (const auto& c : s.campaigns) {
    const auto* rec = truth.find(c.ioc_alert_id);
    REQUIRE(rec != nullptr);
    CHECK(rec->campaign_id == c.campaign_id);
    CHECK(rec->truth_heat == 3);
  }
}

TEST_CASE("EVE output re-ingests with no malformed lines") {
  const auto& w = test::desk_world(1);
  std::stringstream eve;
  w.scenario.write_eve(eve);
  const auto parsed = parse_eve_stream(eve, default_mapping(w.vocab), w.vocab);
  CHECK(parsed.stats.skipped_malformed == 0);
  CHECK(parsed.stats.renamed_duplicate_ids == 0);
  CHECK(parsed.alerts == w.scenario.alerts);

  std::stringstream truth;
  w.scenario.write_truth(truth);
  const auto back = read_truth_jsonl(truth);
  REQUIRE(back.size() == w.scenario.truth.size());
  for (std::size_t i = 0; i < back.size(); i += 101) {
    CHECK(back[i].alert_id == w.scenario.truth[i].alert_id);
    CHECK(back[i].campaign_id == w.scenario.truth[i].campaign_id);
    CHECK(back[i].truth_heat == w.scenario.truth[i].truth_heat);
    CHECK(back[i].step == w.scenario.truth[i].step);
  }
}

TEST_CASE("spec JSON round-trip and validation") {
  const auto vocab = default_vocabulary();
  const auto spec = ScenarioSpec::transfer_family(3);
  const auto back = ScenarioSpec::from_json(spec.to_json());
  CHECK(back.to_json() == spec.to_json());
  CHECK(ScenarioSpec::from_json({{"family", "transfer"}, {"seed", 3}}).to_json() == spec.to_json());
  CHECK(ScenarioSpec::from_json({{"noise_rate", 0.01}}).noise_rate == 0.01);

  auto check_field = [&](ScenarioSpec s, const char* field) {
    try {
      s.validate(vocab);
      FAIL("expected an error for " << field);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::validation);
      CHECK(e.field() == field);
    }
  };
  auto s = ScenarioSpec::desk_scale(1);
  s.duration = 3600.0;
  check_field(s, "duration");
  s = ScenarioSpec::desk_scale(1);
  s.n_attackers = -1;
  check_field(s, "n_attackers");
  s = ScenarioSpec::desk_scale(1);
  s.victim_noise_fraction = 2.0;
  check_field(s, "victim_noise_fraction");
  s = ScenarioSpec::desk_scale(1);
  s.templates[0].steps.back().truth_heat = 2;
  check_field(s, "templates");
  CHECK_THROWS_AS(ScenarioSpec::from_json(nlohmann::json::array()), Error);
}

TEST_CASE("transfer family: disjoint addresses, multi-IP attackers, ASN table covers every address") {
  const auto vocab = default_vocabulary();
  const auto a = generate(ScenarioSpec::desk_scale(2), vocab);
  const auto b = generate(ScenarioSpec::transfer_family(2), vocab);
  std::set<std::string> ips_a, ips_b;
  for (const auto& x : a.alerts) ips_a.insert({x.src_ip, x.dst_ip});
  for (const auto& x : b.alerts) ips_b.insert({x.src_ip, x.dst_ip});
  for (const auto& ip : ips_b) CHECK(ips_a.count(ip) == 0);
  for (const auto& c : b.campaigns) CHECK(c.attacker_ips.size() > 1);

  std::stringstream csv;
  b.write_asn_csv(csv);
  const auto table = AsnTable::from_csv(csv);
  for (const auto& ip : ips_b) CHECK(table.lookup(ip).has_value());

  AggregationConfig cfg = test::default_aggregation(vocab);
  cfg.mode = KeyMode::per_source_asn;
  cfg.asn_table = &table;
  const auto corpus = make_corpus(b.alerts, vocab, cfg);
  std::size_t multi_target = 0;
  for (const auto& e : corpus.store.episodes()) {
    CHECK(e.key.rfind("AS", 0) == 0);
    multi_target += e.targets.size() > 1;
  }
  CHECK(multi_target > 0);
}

TEST_CASE("simulated analyst labels") {
  const auto& w = test::desk_world(1);
  const auto& c = w.scenario.campaigns[0];
  const auto ioc = resolve_ioc(c.ioc_alert_id, w.corpus);
  const auto& crit = w.corpus.store.at(ioc.critical_episode_id);
  CHECK(w.labels.size() >= kMinTrainingLabels);
  std::set<std::string> priors;
  int heated = 0;
  for (const auto& l : w.labels) {
    CHECK(l.critical_episode_id == crit.episode_id);
    CHECK(priors.insert(l.prior_episode_id).second);
    const auto& prior = w.corpus.store.at(l.prior_episode_id);
    CHECK(prior.peak_time < crit.peak_time);
    CHECK(l.created_at == crit.peak_time);
    const auto truth = w.truth->episode_truth(prior);
    if (truth.campaign_id == c.campaign_id) CHECK(l.heat == truth.truth_heat);
    else CHECK(l.heat == 0);
    heated += l.heat > 0;
  }
  CHECK(heated >= 4);
  // Every earlier episode of the campaign is labeled.
  for (const auto& e : w.corpus.store.episodes()) {
    if (e.peak_time >= crit.peak_time) continue;
    const auto truth = w.truth->episode_truth(e);
    if (truth.campaign_id == c.campaign_id && truth.truth_heat > 0) CHECK(priors.count(e.episode_id) == 1);
  }
  CHECK(simulate_analyst_labels(w.corpus, *w.truth, c.ioc_alert_id, kUnboundedLookback, 20, 1) == w.labels);
}

TEST_CASE("episode truth is a majority vote") {
  std::vector<TruthRecord> records{{"a", 0, "discovery", 1, 0}, {"b", 0, "discovery", 1, 0},
                                   {"c", std::nullopt, "discovery", 0, -1}};
  const TruthIndex truth(records);
  Episode e;
  e.alert_ids = {"a", "b", "c"};
  const auto t = truth.episode_truth(e);
  CHECK(t.campaign_id == 0);
  CHECK(t.truth_heat == 1);
  e.alert_ids = {"c"};
  CHECK_FALSE(truth.episode_truth(e).campaign_id);
}
