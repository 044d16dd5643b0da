#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "heat/error.hpp"
#include "support.hpp"

using namespace heat;

namespace {

std::vector<std::size_t> indices(const Hac& hac) {
  std::vector<std::size_t> out;
  for (const auto& h : hac.heated) out.push_back(h.index);
  return out;
}

bool subset(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("prior window is every episode peaking within the lookback before the IoC") {
  const auto& w = test::desk_world(1);
  const auto& store = w.corpus.store;
  for (std::size_t crit : {std::size_t{0}, store.size() / 3, store.size() - 1}) {
    for (double lookback : {0.0, 600.0, 7200.0, kUnboundedLookback}) {
      std::vector<std::size_t> expected;
      for (std::size_t i = 0; i < store.size(); ++i) {
        const double dt = store[crit].peak_time - store[i].peak_time;
        if (dt > 0.0 && dt <= lookback) expected.push_back(i);
      }
      CHECK(prior_window(store, crit, lookback) == expected);
    }
  }
  CHECK_THROWS_AS(prior_window(store, 0, -1.0), Error);
}

TEST_CASE("IP baselines match their definitions and nest") {
  const auto& w = test::desk_world(1);
  const auto& store = w.corpus.store;
  for (const auto& c : w.scenario.campaigns) {
    const Ioc ioc = resolve_ioc(c.ioc_alert_id, w.corpus);
    const auto src = extract_baseline(ioc, w.corpus, HacMethod::src_match, kUnboundedLookback);
    const auto tgt = extract_baseline(ioc, w.corpus, HacMethod::tgt_match, kUnboundedLookback);
    const auto both = extract_baseline(ioc, w.corpus, HacMethod::src_and_tgt_match, kUnboundedLookback);
    CHECK(subset(indices(both), indices(src)));
    CHECK(subset(indices(both), indices(tgt)));
    const Episode& crit = store[src.critical_index];
    std::vector<std::size_t> expected;
    for (std::size_t i : src.window) {
      for (const auto& ip : store[i].sources) {
        if (std::find(crit.sources.begin(), crit.sources.end(), ip) != crit.sources.end()) {
          expected.push_back(i);
          break;
        }
      }
    }
    CHECK(indices(src) == expected);
    for (const auto& h : src.heated) CHECK(h.heat == 3.0);
  }
  const Ioc ioc = resolve_ioc(w.scenario.campaigns[0].ioc_alert_id, w.corpus);
  CHECK_THROWS_AS(extract_baseline(ioc, w.corpus, HacMethod::heat_model, 0.0), Error);
}

TEST_CASE("heat HAC: threshold filters the window and is monotone") {
  const auto& w = test::desk_world(1);
  const auto iocs = candidate_iocs(w.corpus);
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> pick(0, iocs.size() - 1);
  for (int n = 0; n < 10; ++n) {
    const auto& ioc = iocs[pick(rng)];
    const auto all = extract_hac(ioc, w.model, w.corpus, kUnboundedLookback, 0.0);
    std::size_t previous = all.heated.size() + 1;
    for (int step = 0; step <= 30; ++step) {
      const double t = step / 10.0;
      const auto hac = extract_hac(ioc, w.model, w.corpus, kUnboundedLookback, t);
      CHECK(hac.heated.size() <= previous);
      previous = hac.heated.size();
      for (const auto& h : hac.heated) CHECK(h.heat > t);
      CHECK(subset(indices(hac), hac.window));
    }
    CHECK(extract_hac(ioc, w.model, w.corpus, kUnboundedLookback, 3.0).heated.empty());
  }
  CHECK_THROWS_AS(extract_hac(iocs[0], w.model, w.corpus, kUnboundedLookback, -0.5), Error);
}

TEST_CASE("IoC resolution") {
  const auto& w = test::desk_world(1);
  const auto& alert = w.corpus.alerts[100];
  const auto by_id = resolve_ioc(alert.id, w.corpus);
  CHECK(by_id.critical_alert_id == alert.id);
  CHECK(w.corpus.store.at(by_id.critical_episode_id).alert_ids.size() > 0);
  IocQuery q;
  q.signature = alert.signature;
  q.timestamp = alert.timestamp + 2e-7;
  q.src_ip = alert.src_ip;
  q.dst_ip = alert.dst_ip;
  // Several alerts can share all four fields; then the query must be ambiguous.
  std::size_t same = 0;
  for (const auto& a : w.corpus.alerts) {
    same += a.signature == alert.signature && a.timestamp == alert.timestamp && a.src_ip == alert.src_ip &&
            a.dst_ip == alert.dst_ip;
  }
  if (same == 1) CHECK(resolve_ioc(q, w.corpus).critical_alert_id == alert.id);
  else CHECK_THROWS_AS(resolve_ioc(q, w.corpus), Error);

  IocQuery loose;
  loose.signature = alert.signature;
  loose.timestamp = 0.0;
  try {
    resolve_ioc(loose, w.corpus);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_found);
  }
  try {
    resolve_ioc("no-such-alert", w.corpus);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::not_found);
    CHECK(e.field() == "ioc");
  }
  CHECK_THROWS_AS(resolve_ioc(IocQuery{}, w.corpus), Error);
}

TEST_CASE("candidate IoCs: one per episode, earliest alert, time ordered") {
  const auto& w = test::desk_world(1);
  const auto iocs = candidate_iocs(w.corpus, "ET EXFIL", 1);
  REQUIRE_FALSE(iocs.empty());
  std::set<std::string> episodes;
  for (std::size_t i = 0; i < iocs.size(); ++i) {
    CHECK(episodes.insert(iocs[i].critical_episode_id).second);
    CHECK(iocs[i].signature.find("ET EXFIL") != std::string::npos);
    if (i) CHECK(iocs[i - 1].timestamp <= iocs[i].timestamp);
    for (const auto& id : w.corpus.store.at(iocs[i].critical_episode_id).alert_ids) {
      const Alert* a = w.corpus.find_alert(id);
      if (a->signature.find("ET EXFIL") != std::string::npos && a->severity <= 1) {
        CHECK(a->timestamp >= iocs[i].timestamp);
      }
    }
  }
  bool planted = false;
  for (const auto& ioc : iocs) planted |= ioc.critical_alert_id == w.scenario.campaigns[0].ioc_alert_id;
  CHECK(planted);
}

TEST_CASE("HAC JSON") {
  const auto& w = test::desk_world(1);
  const Ioc ioc = resolve_ioc(w.scenario.campaigns[0].ioc_alert_id, w.corpus);
  const auto hac = extract_hac(ioc, w.model, w.corpus, 3600.0, 0.5);
  const auto j = to_json(hac, w.corpus.store);
  CHECK(j["method"] == "heat-model");
  CHECK(j["lookback"] == 3600.0);
  CHECK(j["episodes"].size() == hac.heated.size());
  CHECK(j["window_size"] == hac.window.size());
  CHECK(to_json(extract_hac(ioc, w.model, w.corpus, kUnboundedLookback, 0.5), w.corpus.store)["lookback"].is_null());
  CHECK(parse_hac_method("src_and_tgt_match") == HacMethod::src_and_tgt_match);
  CHECK_THROWS_AS(parse_hac_method("dst-match"), Error);
}
