// One PASS/FAIL line per primary acceptance criterion. Exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "heat/cli.hpp"
#include "heat/gain.hpp"
#include "heat/service.hpp"
#include "support.hpp"

using namespace heat;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and thresholds.
constexpr double kEntropyTolerance = 1e-9;
constexpr double kEntropyBudgetSeconds = 5.0;
constexpr int kEntropyTrials = 1000;
constexpr int kGainTriples = 100;
constexpr int kPartitionSeeds = 20;
constexpr int kRenamingPairs = 200;
constexpr int kPlantedSeeds = 10;
constexpr double kMinRecall = 0.8;
constexpr int kMinSeedWins = 8;
constexpr double kPlantedBudgetSeconds = 120.0;
constexpr double kHacThreshold = 0.5;
constexpr int kTransferSeeds = 10;
constexpr std::size_t kMaxTransferLabels = 125;
constexpr double kMaxCvMse = 0.05;
constexpr int kProbePairs = 500;
constexpr int kMonotoneIocs = 50;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  failures += !ok;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

AggregationConfig ip_config(const StageVocabulary& vocab) { return test::default_aggregation(vocab); }

// --- entropy oracle ---------------------------------------------------------

double brute_entropy(const std::vector<double>& counts, double base) {
  long double total = 0;
  for (double c : counts) total += c;
  if (total == 0) return 0.0;
  long double h = 0;
  for (double c : counts) {
    if (c > 0) h -= (c / total) * std::log(c / total);
  }
  return static_cast<double>(h / std::log(static_cast<long double>(base)));
}

double brute_conditional(const std::vector<StageHeat>& pairs, double base) {
  std::map<StageHeat, double> joint;
  std::map<int, double> marginal;
  for (const auto& p : pairs) {
    joint[p] += 1;
    marginal[p.second] += 1;
  }
  std::vector<double> jc, mc;
  for (const auto& kv : joint) jc.push_back(kv.second);
  for (const auto& kv : marginal) mc.push_back(kv.second);
  return brute_entropy(jc, base) - brute_entropy(mc, base);
}

void entropy_oracle() {
  const auto t0 = Clock::now();
  const auto vocab = default_vocabulary();
  const double base = static_cast<double>(vocab.size());
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> symbols(1, vocab.size());
  std::uniform_real_distribution<double> weight(0.0, 100.0);
  std::uniform_int_distribution<std::size_t> stage(0, vocab.size() - 1);
  std::uniform_int_distribution<int> heat(0, 3);
  std::uniform_int_distribution<int> size(1, 200);
  double worst = 0.0;
  for (int i = 0; i < kEntropyTrials; ++i) {
    std::vector<double> c(symbols(rng));
    for (auto& v : c) v = (i % 2) ? std::floor(weight(rng)) : weight(rng);
    worst = std::max(worst, std::abs(entropy(c, base) - brute_entropy(c, base)));
    std::vector<StageHeat> pairs(static_cast<std::size_t>(size(rng)));
    for (auto& p : pairs) p = {stage(rng), heat(rng)};
    worst = std::max(worst, std::abs(conditional_entropy(pairs, base) - brute_conditional(pairs, base)));
  }
  const double uniform = entropy(std::vector<double>(vocab.size(), 17.0), base);
  const double elapsed = seconds_since(t0);
  report(worst <= kEntropyTolerance && uniform == 1.0 && elapsed < kEntropyBudgetSeconds, "entropy-oracle",
         fmt("%d distributions, max |error| %.2e (<= %.0e), uniform over %zu stages = %.17g, %.3fs", kEntropyTrials,
             worst, kEntropyTolerance, vocab.size(), uniform, elapsed));
}

// --- gain identity ------------------------------------------------------------

void gain_identity() {
  const auto& w = test::desk_world(1);
  const auto& store = w.corpus.store;
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> crit(store.size() / 10, store.size() - 1);
  std::uniform_real_distribution<double> lookback(600.0, 86400.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> heat(0.0, 3.0);
  std::uniform_int_distribution<std::size_t> stage(0, w.vocab.size() - 1);
  std::uniform_int_distribution<int> label(0, 3);
  std::uniform_int_distribution<int> n_training(0, 150);
  int ok = 0;
  int partial = 0;
  for (int i = 0; i < kGainTriples; ++i) {
    Hac hac;
    hac.critical_index = crit(rng);
    hac.window = prior_window(store, hac.critical_index, lookback(rng));
    const double keep = unit(rng);
    for (std::size_t idx : hac.window) {
      if (unit(rng) < keep) hac.heated.push_back({idx, heat(rng)});
    }
    std::vector<StageHeat> training(i % 10 == 0 ? 0 : static_cast<std::size_t>(n_training(rng)));
    for (auto& t : training) t = {stage(rng), label(rng)};
    const auto r = compute_gain(hac, store, training, w.vocab);
    partial += r.partial;
    ok += r.gain == r.acg + r.nrg - r.coh && r.coh >= 0.0 && r.acg >= 0.0;
  }
  report(ok == kGainTriples, "gain-identity",
         fmt("%d/%d triples with gain == acg + nrg - coh exactly, coh >= 0, acg >= 0 (%d without training labels)",
             ok, kGainTriples, partial));
}

// --- partition ------------------------------------------------------------------

void partition() {
  const auto vocab = default_vocabulary();
  int ok = 0;
  std::size_t alerts = 0;
  for (int seed = 1; seed <= kPartitionSeeds; ++seed) {
    const auto spec = seed % 2 ? ScenarioSpec::desk_scale(seed) : ScenarioSpec::transfer_family(seed);
    const auto sc = generate(spec, vocab);
    std::stringstream csv;
    sc.write_asn_csv(csv);
    const auto asn = AsnTable::from_csv(csv);
    auto cfg = ip_config(vocab);
    if (seed % 4 == 0) {
      cfg.mode = KeyMode::per_source_asn;
      cfg.asn_table = &asn;
    }
    const auto store = build_all_episodes(sc.alerts, cfg);
    std::set<std::string> seen;
    std::size_t total = 0;
    bool disjoint = true;
    for (const auto& e : store.episodes()) {
      total += e.alert_count;
      for (const auto& id : e.alert_ids) disjoint &= seen.insert(id).second;
    }
    std::set<std::string> all;
    for (const auto& a : sc.alerts) all.insert(a.id);
    ok += disjoint && total == sc.alerts.size() && seen == all;
    alerts += sc.alerts.size();
  }
  report(ok == kPartitionSeeds, "partition",
         fmt("%d/%d corpora (IP and ASN keys) partitioned exactly, %zu alerts total", ok, kPartitionSeeds, alerts));
}

// --- network-agnostic invariance ------------------------------------------------------

void renaming_invariance() {
  const auto& w = test::desk_world(1);
  const auto& store = w.corpus.store;
  const auto names = test::ip_renaming(w.corpus, 99);
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  int same_features = 0, same_predictions = 0, pairs = 0;
  while (pairs < kRenamingPairs) {
    const auto p = pick(rng), c = pick(rng);
    if (p == c) continue;
    ++pairs;
    const auto rp = test::renamed(store[p], names);
    const auto rc = test::renamed(store[c], names);
    const auto before = extract_features(store[p], store[c], w.vocab).to_vector();
    const auto after = extract_features(rp, rc, w.vocab).to_vector();
    same_features += before.size() == after.size() &&
                     std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0;
    const double h0 = predict(w.model, store[p], store[c]);
    const double h1 = predict(w.model, rp, rc);
    same_predictions += std::memcmp(&h0, &h1, sizeof h0) == 0;
  }
  report(same_features == kRenamingPairs && same_predictions == kRenamingPairs, "ip-renaming-invariance",
         fmt("%d/%d pairs bit-identical features, %d/%d identical predictions", same_features, kRenamingPairs,
             same_predictions, kRenamingPairs));
}

// --- planted campaign extraction ---------------------------------------------------------

void planted_extraction() {
  const auto t0 = Clock::now();
  const auto vocab = default_vocabulary();
  std::size_t planted = 0, found = 0;
  int seed_wins = 0;
  std::string per_seed;
  for (int seed = 1; seed <= kPlantedSeeds; ++seed) {
    const auto sc = generate(ScenarioSpec::desk_scale(seed), vocab);
    const auto corpus = make_corpus(sc.alerts, vocab, ip_config(vocab));
    const TruthIndex truth(sc.truth);
    const auto labels =
        simulate_analyst_labels(corpus, truth, sc.campaigns[0].ioc_alert_id, kUnboundedLookback, 20, seed);
    const auto model = train(labels, corpus.store, vocab);
    const auto training = training_stage_heats(model);
    bool win = true;
    for (std::size_t c = 1; c < sc.campaigns.size(); ++c) {
      const Ioc ioc = resolve_ioc(sc.campaigns[c].ioc_alert_id, corpus);
      const auto hac = extract_hac(ioc, model, corpus, kUnboundedLookback, kHacThreshold);
      std::set<std::size_t> heated;
      for (const auto& h : hac.heated) heated.insert(h.index);
      for (std::size_t idx : hac.window) {
        const auto t = truth.episode_truth(corpus.store[idx]);
        if (t.campaign_id == static_cast<int>(c) && t.truth_heat > 0) {
          ++planted;
          found += heated.count(idx);
        }
      }
      const double delta = compute_gain(hac, corpus.store, training, vocab).gain;
      for (auto m : {HacMethod::src_match, HacMethod::tgt_match, HacMethod::src_and_tgt_match}) {
        const auto base = extract_baseline(ioc, corpus, m, kUnboundedLookback);
        win &= delta > compute_gain(base, corpus.store, training, vocab).gain;
      }
    }
    seed_wins += win;
    per_seed += win ? '+' : '-';
  }
  const double recall = planted ? static_cast<double>(found) / static_cast<double>(planted) : 0.0;
  const double elapsed = seconds_since(t0);
  report(recall >= kMinRecall && seed_wins >= kMinSeedWins && elapsed < kPlantedBudgetSeconds,
         "planted-campaign-extraction",
         fmt("recall %.3f (%zu/%zu planted prior episodes, >= %.2f); heat gain beat all three IP baselines on "
             "every test IoC in %d/%d seeds [%s] (>= %d); %.1fs",
             recall, found, planted, kMinRecall, seed_wins, kPlantedSeeds, per_seed.c_str(), kMinSeedWins, elapsed));
}

// --- transfer / fine-tune ------------------------------------------------------------------

void transfer() {
  const auto vocab = default_vocabulary();
  int reduced = 0;
  std::size_t max_labels = 0;
  std::string per_seed;
  for (int seed = 1; seed <= kTransferSeeds; ++seed) {
    const auto a = generate(ScenarioSpec::desk_scale(seed), vocab);
    const auto ca = make_corpus(a.alerts, vocab, ip_config(vocab));
    const TruthIndex ta(a.truth);
    const auto base =
        train(simulate_analyst_labels(ca, ta, a.campaigns[0].ioc_alert_id, kUnboundedLookback, 20, seed), ca.store,
              vocab);

    const auto b = generate(ScenarioSpec::transfer_family(seed + 1000), vocab);
    std::stringstream csv;
    b.write_asn_csv(csv);
    const auto asn = AsnTable::from_csv(csv);
    auto cfg = ip_config(vocab);
    cfg.mode = KeyMode::per_source_asn;
    cfg.asn_table = &asn;
    const auto cb = make_corpus(b.alerts, vocab, cfg);
    const TruthIndex tb(b.truth);
    auto labels = simulate_analyst_labels(cb, tb, b.campaigns[0].ioc_alert_id, kUnboundedLookback, 10, seed);
    const auto second =
        simulate_analyst_labels(cb, tb, b.campaigns[1].ioc_alert_id, kUnboundedLookback, 10, seed + 7);
    labels.insert(labels.end(), second.begin(), second.end());
    max_labels = std::max(max_labels, labels.size());
    const auto tuned = fine_tune(base, labels, cb.store);

    double coh_base = 0.0, coh_tuned = 0.0;
    const auto tr_base = training_stage_heats(base);
    const auto tr_tuned = training_stage_heats(tuned);
    for (std::size_t c = 2; c < b.campaigns.size(); ++c) {
      const Ioc ioc = resolve_ioc(b.campaigns[c].ioc_alert_id, cb);
      coh_base += compute_gain(extract_hac(ioc, base, cb, kUnboundedLookback, kHacThreshold), cb.store, tr_base, vocab).coh;
      coh_tuned +=
          compute_gain(extract_hac(ioc, tuned, cb, kUnboundedLookback, kHacThreshold), cb.store, tr_tuned, vocab).coh;
    }
    const bool win = coh_tuned < coh_base && labels.size() <= kMaxTransferLabels;
    reduced += win;
    per_seed += win ? '+' : '-';
  }
  report(reduced >= kMinSeedWins, "transfer-fine-tune",
         fmt("fine-tuning on family B (ASN keys, <= %zu labels, max used %zu) lowered mean coherence penalty on "
             "held-out IoCs in %d/%d seeds [%s] (>= %d)",
             kMaxTransferLabels, max_labels, reduced, kTransferSeeds, per_seed.c_str(), kMinSeedWins));
}

// --- model contract -------------------------------------------------------------------------

void model_contract() {
  const auto& w = test::desk_world(2);
  const auto& store = w.corpus.store;
  // Heat 3 exactly when the pair shares a source address: separable on one feature.
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> pick(0, store.size() - 1);
  std::vector<LabeledPair> labels;
  std::size_t hot = 0, cold = 0;
  std::set<std::pair<std::size_t, std::size_t>> used;
  while (hot < 100 || cold < 100) {
    const auto c = pick(rng);
    const auto window = prior_window(store, c, kUnboundedLookback);
    if (window.empty()) continue;
    const auto p = window[std::uniform_int_distribution<std::size_t>(0, window.size() - 1)(rng)];
    if (!used.insert({p, c}).second) continue;
    const bool shared = intersection_size(store[p].sources, store[c].sources) > 0;
    if (shared ? hot >= 100 : cold >= 100) continue;
    (shared ? hot : cold)++;
    labels.push_back({store[c].episode_id, store[p].episode_id, shared ? 3 : 0, "oracle", 0.0});
  }
  const auto model = train(labels, store, w.vocab);

  std::vector<EpisodePair> probe;
  while (probe.size() < static_cast<std::size_t>(kProbePairs)) {
    EpisodePair pr{pick(rng), pick(rng)};
    if (pr.prior != pr.critical) probe.push_back(pr);
  }
  const auto before = predict_batch(model, store, probe);
  bool in_range = true;
  for (double h : before) in_range &= h >= 0.0 && h <= kMaxHeat;
  const auto path = fs::temp_directory_path() / ("heat-acceptance-model-" + std::to_string(::getpid()) + ".json");
  save_model(model, path.string());
  const auto after = predict_batch(load_model(path.string()), store, probe);
  fs::remove(path);
  const bool identical = std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0;
  report(model.cv_mse <= kMaxCvMse && in_range && identical, "model-contract",
         fmt("%d-fold CV MSE %.4f on separable labels (<= %.2f); %d probe predictions in [0, 3]: %s; save/load "
             "identical: %s",
             model.hyper.cv_folds, model.cv_mse, kMaxCvMse, kProbePairs, in_range ? "yes" : "no",
             identical ? "yes" : "no"));
}

// --- threshold monotonicity -------------------------------------------------------------------

void threshold_monotonicity() {
  const auto& w = test::desk_world(1);
  const auto iocs = candidate_iocs(w.corpus);
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> pick(0, iocs.size() - 1);
  int ok = 0;
  for (int i = 0; i < kMonotoneIocs; ++i) {
    const auto& ioc = iocs[pick(rng)];
    std::size_t previous = std::numeric_limits<std::size_t>::max();
    bool monotone = true;
    for (int step = 0; step <= 30; ++step) {
      const auto size = extract_hac(ioc, w.model, w.corpus, kUnboundedLookback, step / 10.0).heated.size();
      monotone &= size <= previous;
      previous = size;
    }
    ok += monotone;
  }
  report(ok == kMonotoneIocs, "threshold-monotonicity",
         fmt("%d/%d IoCs with non-increasing HAC size over thresholds 0.0..3.0", ok, kMonotoneIocs));
}

// --- CLI / service parity -----------------------------------------------------------------------

nlohmann::json cli_json(const fs::path& ws, std::vector<std::string> args) {
  std::vector<std::string> full{"heat", "--workspace", ws.string(), "--json"};
  full.insert(full.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : full) argv.push_back(a.c_str());
  std::istringstream in;
  std::ostringstream out, err;
  if (run_cli(static_cast<int>(argv.size()), argv.data(), in, out, err) != 0) return {{"cli_error", err.str()}};
  return nlohmann::json::parse(out.str());
}

void cli_service_parity() {
  const auto dir = test::temp_dir("acceptance");
  test::write_desk_files(3, dir);
  const auto& world = test::desk_world(3);
  int checks = 0, equal = 0;
  {
    Workspace ws(dir / "ws");
    ws.ingest_file((dir / "eve.json").string(), {});
    ws.train(std::nullopt, world.labels);
    Service service(ws);
    const int port = service.bind("127.0.0.1", 0);
    std::thread server([&] { service.serve(); });
    httplib::Client client("127.0.0.1", port);
    client.set_read_timeout(120, 0);
    auto http = [&](const std::string& path) {
      auto r = client.Get(path);
      return r && r->status == 200 ? nlohmann::json::parse(r->body) : nlohmann::json{{"http_error", path}};
    };
    auto compare = [&](const nlohmann::json& a, const nlohmann::json& b) {
      ++checks;
      equal += a == b;
    };
    compare(cli_json(dir / "ws", {"rank"}), http("/rank"));
    compare(cli_json(dir / "ws", {"rank", "--acg-min", "0.2", "--threshold", "1.0"}),
            http("/rank?acg_min=0.2&threshold=1.0"));
    for (const auto& c : world.scenario.campaigns) {
      compare(cli_json(dir / "ws", {"gain", "--ioc", c.ioc_alert_id}), http("/gain/" + c.ioc_alert_id));
      compare(cli_json(dir / "ws", {"gain", "--ioc", c.ioc_alert_id, "--method", "src-match"}),
              http("/gain/" + c.ioc_alert_id + "?method=src-match"));
    }
    service.stop();
    server.join();
  }
  fs::remove_all(dir);
  report(equal == checks, "cli-service-parity",
         fmt("%d/%d rank and gain documents content-equal between CLI --json and REST", equal, checks));
}

}  // namespace

int main() {
  entropy_oracle();
  gain_identity();
  partition();
  renaming_invariance();
  planted_extraction();
  transfer();
  model_contract();
  threshold_monotonicity();
  cli_service_parity();
  std::printf("%d criteria failed\n", failures);
  return failures;
}
