// Parallel kernels against their serial references on a desk-scale scenario.
#include <random>

#include <benchmark/benchmark.h>

#include "heat/corpus.hpp"
#include "heat/hac.hpp"
#include "heat/reference.hpp"
#include "heat/scenario.hpp"

namespace {

struct Fixture {
  heat::StageVocabulary vocab = heat::default_vocabulary();
  heat::Scenario scenario;
  heat::AggregationConfig cfg;
  heat::Corpus corpus;
  heat::HeatModel model;
  std::vector<heat::EpisodePair> pairs;

  Fixture() {
    scenario = heat::generate(heat::ScenarioSpec::desk_scale(1), vocab);
    cfg.smoothing = heat::SmoothingConfig::from_vocabulary(vocab);
    corpus = heat::make_corpus(scenario.alerts, vocab, cfg);
    const heat::TruthIndex truth(scenario.truth);
    const auto labels = heat::simulate_analyst_labels(corpus, truth, scenario.campaigns[0].ioc_alert_id,
                                                      heat::kUnboundedLookback, 20, 1);
    model = heat::train(labels, corpus.store, vocab, heat::Hyperparams{});
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, corpus.store.size() - 1);
    while (pairs.size() < 20000) {
      const heat::EpisodePair p{pick(rng), pick(rng)};
      if (p.prior != p.critical) pairs.push_back(p);
    }
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_EpisodesParallel(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::build_all_episodes(f.scenario.alerts, f.cfg));
}

void BM_EpisodesReference(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::reference::build_all_episodes(f.scenario.alerts, f.cfg));
}

void BM_FeaturesParallel(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::feature_matrix(f.corpus.store, f.pairs, f.vocab));
}

void BM_FeaturesReference(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::reference::feature_matrix(f.corpus.store, f.pairs, f.vocab));
}

void BM_PredictParallel(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::predict_batch(f.model, f.corpus.store, f.pairs));
}

void BM_PredictReference(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(heat::reference::predict_batch(f.model, f.corpus.store, f.pairs));
}

}  // namespace

BENCHMARK(BM_EpisodesParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EpisodesReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeaturesParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FeaturesReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PredictReference)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
