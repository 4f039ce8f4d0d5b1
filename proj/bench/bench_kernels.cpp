// Serial reference vs OpenMP path for the per-segment kernels.
// Arg(0) selects the serial reference; Arg(n) runs the parallel path on n threads.

#include <benchmark/benchmark.h>

#include <aspectseed/classifier.hpp>
#include <aspectseed/embeddings.hpp>
#include <aspectseed/pseudo_label.hpp>
#include <aspectseed/seed_update.hpp>
#include <aspectseed/synthetic.hpp>

using namespace aspectseed;

namespace {

struct World {
  Corpus corpus;
  EmbeddingTable table;
  SeedSets seeds;
  ClassifierModel k_model;
  ClassifierModel k1_model;
};

const World& world() {
  static const World w = [] {
    World w;
    const auto data = generate_synthetic({});
    std::vector<std::string> lines;
    for (const auto& s : data.train) lines.push_back(s.text);
    w.corpus = build_corpus(lines);
    EmbeddingConfig ec;
    ec.dim = 100;
    ec.epochs = 2;
    w.table = train_embeddings(w.corpus, ec);
    w.seeds = resolve_seeds(data.seeds, w.corpus.vocabulary());
    w.k_model = ClassifierModel::initialized(ec.dim, 32, data.aspects.size(), 0.5, 1);
    w.k1_model = ClassifierModel::initialized(ec.dim, 32, data.aspects.size() + 1, 0.5, 2);
    return w;
  }();
  return w;
}

ExecPolicy policy_for(const benchmark::State& state) {
  return ExecPolicy{static_cast<int>(state.range(0)), false};
}

void BM_GenerateAll(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) {
    if (state.range(0) == 0)
      benchmark::DoNotOptimize(generate_all_serial(w.corpus, w.seeds, w.table));
    else
      benchmark::DoNotOptimize(generate_all(w.corpus, w.seeds, w.table, policy_for(state)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.corpus.size()));
}

void BM_Predict(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state) {
    if (state.range(0) == 0)
      benchmark::DoNotOptimize(predict_serial(w.k1_model, w.corpus, w.table));
    else
      benchmark::DoNotOptimize(predict(w.k1_model, w.corpus, w.table, policy_for(state)));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.corpus.size()));
}

void BM_CandidatePool(benchmark::State& state) {
  const auto& w = world();
  ProbeOptions o;
  o.max_segments = 200;
  for (auto _ : state) {
    if (state.range(0) == 0)
      benchmark::DoNotOptimize(candidate_pool_serial(w.k_model, w.corpus, w.table, o));
    else
      benchmark::DoNotOptimize(candidate_pool(w.k_model, w.corpus, w.table, o, policy_for(state)));
  }
}

}  // namespace

BENCHMARK(BM_GenerateAll)->Arg(0)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Predict)->Arg(0)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_CandidatePool)->Arg(0)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
