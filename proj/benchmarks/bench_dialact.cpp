#include <benchmark/benchmark.h>

#include <random>

#include "dialact/recognizer.hpp"
#include "dialact/synth.hpp"

using namespace dialact;

namespace {

// A source model over the bundled inventory, then a corpus of roughly
// 2,500 acts sampled from it.
const NGramModel& source() {
  static const NGramModel m = [] {
    const ActInventory inv = default_inventory();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, inv.size() - 1);
    std::vector<Dialogue> ds;
    for (int d = 0; d < 50; ++d) {
      Dialogue dlg;
      dlg.id = "b" + std::to_string(d);
      for (int i = 0; i < 12; ++i) dlg.utterances.push_back({i % 2 ? Speaker::B : Speaker::A, {act_at(pick(rng))}, {}});
      ds.push_back(std::move(dlg));
    }
    TrainOptions opt;
    opt.weights = InterpolationWeights{0.2, 0.3, 0.5};
    return train_model(Corpus(inv, ds), opt);
  }();
  return m;
}

const Corpus& corpus() {
  static const Corpus c = [] {
    GenerateOptions opt;
    opt.dialogues = 200;
    opt.deviation_rate = 0.1;
    opt.max_length = 40;
    return generate_corpus(source(), opt);
  }();
  return c;
}

void BM_Train(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(train_model(corpus()));
  state.counters["acts"] = static_cast<double>(corpus().act_count());
}
BENCHMARK(BM_Train)->Unit(benchmark::kMillisecond);

void BM_PredictTop3(benchmark::State& state) {
  const NGramModel m = train_model(corpus());
  const History h = m.advance(m.start(), m.token(m.inventory().at("INIT")));
  for (auto _ : state) benchmark::DoNotOptimize(predict_top_k(m, h, 3));
}
BENCHMARK(BM_PredictTop3);

void BM_Recognize(benchmark::State& state) {
  const NGramModel m = train_model(corpus());
  const DialogueGrammar g = default_grammar(m.inventory());
  std::size_t acts = 0;
  for (auto _ : state)
    for (const auto& d : corpus().dialogues()) {
      benchmark::DoNotOptimize(recognize(g, m, d));
      acts += d.act_count();
    }
  state.SetItemsProcessed(static_cast<std::int64_t>(acts));
}
BENCHMARK(BM_Recognize)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
