#include <doctest.h>

#include <atomic>
#include <fstream>
#include <thread>

#include "heat/error.hpp"
#include "heat/workspace.hpp"
#include "support.hpp"

using namespace heat;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& fn, std::string* message = nullptr) {
  try {
    fn();
  } catch (const Error& e) {
    if (message) *message = e.what();
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::internal;
}

std::vector<LabeledPair> campaign_labels(const Workspace& ws, std::uint64_t seed, int campaign, int negatives) {
  const auto& w = test::desk_world(seed);
  return simulate_analyst_labels(*ws.corpus(), *w.truth, w.scenario.campaigns[campaign].ioc_alert_id,
                                 kUnboundedLookback, negatives, seed);
}

std::size_t line_count(const fs::path& path) {
  std::ifstream in(path);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) n += !line.empty();
  return n;
}

}  // namespace

TEST_CASE("workspace lifecycle") {
  const auto dir = test::temp_dir("ws");
  test::write_desk_files(1, dir);
  Workspace ws(dir / "ws");
  CHECK(fs::exists(dir / "ws" / "config.json"));
  CHECK(fs::exists(dir / "ws" / "vocabulary.json"));
  CHECK_FALSE(ws.corpus_info());
  CHECK(kind_of([&] { ws.corpus(); }) == ErrorKind::not_found);

  const auto info = ws.ingest_file((dir / "eve.json").string(), {});
  CHECK(info.stats.alerts == test::desk_world(1).scenario.alerts.size());
  CHECK(info.episodes == test::desk_world(1).corpus.store.size());
  CHECK(line_count(dir / "ws" / "corpus" / info.corpus_id / "episodes.jsonl") == info.episodes);

  SUBCASE("ingest is idempotent") {
    const auto again = ws.ingest_file((dir / "eve.json").string(), {});
    CHECK(again.corpus_id == info.corpus_id);
    CHECK(again.episodes == info.episodes);
    std::size_t dirs = 0;
    for (const auto& entry : fs::directory_iterator(dir / "ws" / "corpus")) dirs += entry.is_directory();
    CHECK(dirs == 1);
    CHECK(ws.corpus()->store.episodes() == test::desk_world(1).corpus.store.episodes());
  }

  SUBCASE("no model yet") {
    std::string message;
    HacQuery q;
    q.ioc = test::desk_world(1).scenario.campaigns[0].ioc_alert_id;
    CHECK(kind_of([&] { hac_view(ws, q); }, &message) == ErrorKind::conflict);
    CHECK(message == "no active model");
    q.method = HacMethod::src_match;
    CHECK(hac_view(ws, q)["episodes"].size() > 0);
    CHECK(kind_of([&] { ws.fine_tune(); }) == ErrorKind::conflict);
  }

  SUBCASE("labels are validated and appended") {
    auto labels = campaign_labels(ws, 1, 0, 20);
    auto bad = labels;
    bad[3].prior_episode_id = "missing";
    CHECK(kind_of([&] { ws.add_labels(bad); }) == ErrorKind::not_found);
    CHECK(ws.labels().empty());
    CHECK(ws.add_labels(labels) == labels.size());
    CHECK(ws.labels().size() == labels.size());
    labels[0].heat = labels[0].heat == 3 ? 0 : 3;
    ws.add_labels({labels[0]});
    const auto stored = ws.labels();
    CHECK(stored.size() == labels.size());
    CHECK(stored[0].heat == labels[0].heat);
    CHECK(line_count(dir / "ws" / "labels.jsonl") == labels.size() + 1);
  }

  SUBCASE("training, versions and fine-tuning") {
    const auto labels = campaign_labels(ws, 1, 0, 20);
    const std::vector<LabeledPair> few(labels.begin(), labels.begin() + 10);
    std::string message;
    CHECK(kind_of([&] { ws.train(std::nullopt, few); }, &message) == ErrorKind::validation);
    CHECK(message.find("25 labels required") != std::string::npos);
    CHECK(ws.labels().empty());  // failed runs leave the log alone

    const auto v1 = ws.train(std::nullopt, labels);
    CHECK(v1.version == 1);
    CHECK(v1.active);
    CHECK(v1.labels == labels.size());
    CHECK(ws.labels().size() == labels.size());
    CHECK(fs::exists(dir / "ws" / "models" / "v0001.json"));
    CHECK(ws.active_model_version() == 1);
    CHECK(kind_of([&] { ws.fine_tune(); }) == ErrorKind::validation);

    const auto more = campaign_labels(ws, 1, 1, 5);
    const auto v2 = ws.fine_tune(std::nullopt, more);
    CHECK(v2.version == 2);
    CHECK(v2.base_version == 1);
    CHECK(ws.model()->training.size() > ws.model("1")->training.size());
    const auto listed = ws.models();
    REQUIRE(listed.size() == 2);
    CHECK_FALSE(listed[0].active);
    CHECK(listed[1].active);

    ws.activate_model(1);
    CHECK(ws.active_model_version() == 1);
    CHECK(kind_of([&] { ws.activate_model(9); }) == ErrorKind::not_found);
    CHECK(kind_of([&] { ws.model("v9"); }) == ErrorKind::not_found);
    CHECK(kind_of([&] { ws.model("bogus-path.json"); }) == ErrorKind::not_found);
    CHECK(ws.model((dir / "ws" / "models" / "v0002.json").string())->training_fingerprint ==
          ws.model("v2")->training_fingerprint);

    // A fresh handle on the same root sees the same state.
    Workspace reopened(dir / "ws");
    CHECK(reopened.active_model_version() == 1);
    CHECK(reopened.corpus_info()->corpus_id == info.corpus_id);
    CHECK(reopened.models().size() == 2);
    RankQuery rq;
    CHECK(rank_view(reopened, rq) == rank_view(ws, rq));
  }

  fs::remove_all(dir);
}

TEST_CASE("a second training run is refused while one is active; reads continue") {
  const auto dir = test::temp_dir("ws-lock");
  test::write_desk_files(1, dir);
  Workspace ws(dir / "ws");
  ws.ingest_file((dir / "eve.json").string(), {});
  ws.train(std::nullopt, campaign_labels(ws, 1, 0, 20));
  Hyperparams slow;
  slow.gbrt.n_estimators = 4000;
  slow.gbrt.max_depth = 6;
  std::atomic<bool> done{false};
  std::thread trainer([&] {
    ws.train(slow);
    done = true;
  });
  bool saw_conflict = false;
  for (int i = 0; i < 200 && !done && !saw_conflict; ++i) {
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    try {
      ws.train();
    } catch (const Error& e) {
      saw_conflict = e.kind() == ErrorKind::conflict;
    }
    if (!done) CHECK(ws.active_model_version().has_value());
  }
  trainer.join();
  CHECK(saw_conflict);
  fs::remove_all(dir);
}

TEST_CASE("config") {
  const auto c = WorkspaceConfig::from_json(nlohmann::json::parse(
      R"({"port": 9000, "threshold": 1.0, "lookback": 7200, "auth_token": "t", "gain": {"extended_nrg_base": true}})"));
  CHECK(c.port == 9000);
  CHECK(c.threshold == 1.0);
  CHECK(c.lookback_seconds == 7200.0);
  CHECK(c.auth_token == "t");
  CHECK(c.gain.extended_nrg_base);
  CHECK(c.acg_min == 0.4);
  const auto back = WorkspaceConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(WorkspaceConfig::from_json(nlohmann::json::object()).lookback_seconds == kUnboundedLookback);
  CHECK_THROWS_AS(WorkspaceConfig::from_json({{"port", 70000}}), Error);
  CHECK_THROWS_AS(WorkspaceConfig::from_json({{"threshold", -1}}), Error);
  CHECK(parse_lookback("inf") == kUnboundedLookback);
  CHECK(parse_lookback("90.5") == 90.5);
  CHECK_THROWS_AS(parse_lookback("-3"), Error);
  CHECK_THROWS_AS(parse_lookback("soon"), Error);
}

TEST_CASE("episode view paging and filters") {
  const auto dir = test::temp_dir("ws-view");
  test::write_desk_files(1, dir);
  Workspace ws(dir / "ws");
  ws.ingest_file((dir / "eve.json").string(), {});
  EpisodeQuery q;
  q.limit = 7;
  q.offset = 3;
  const auto page = episodes_view(ws, q);
  CHECK(page["episodes"].size() == 7);
  CHECK(page["total"] == ws.corpus()->store.size());
  CHECK(page["episodes"][0]["episode_id"] == ws.corpus()->store[3].episode_id);
  q = {};
  q.stage = "exfiltration";
  for (const auto& e : episodes_view(ws, q)["episodes"]) CHECK(e["stage"] == "exfiltration");
  q.stage = "teleportation";
  CHECK_THROWS_AS(episodes_view(ws, q), Error);
  fs::remove_all(dir);
}
