#include <benchmark/benchmark.h>

#include <vector>

#include "capcritic/corpus.hpp"
#include "capcritic/critic.hpp"
#include "capcritic/evalstats.hpp"
#include "capcritic/fft.hpp"
#include "capcritic/fusion.hpp"
#include "capcritic/metrics_baseline.hpp"
#include "capcritic/rng.hpp"
#include "capcritic/runtime.hpp"
#include "capcritic/trainer.hpp"

using namespace capcritic;

namespace {

std::vector<double> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

void BM_CircularConvolve(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  auto a = noise(d, 1), b = noise(d, 2);
  for (auto _ : state) benchmark::DoNotOptimize(circular_convolve(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_CircularConvolve)->RangeMultiplier(4)->Range(64, 8192)->Complexity(benchmark::oNLogN);

void BM_CountSketch(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  auto plan = CountSketchPlan::make(3, m, 8192);
  auto x = noise(m, 4);
  for (auto _ : state) benchmark::DoNotOptimize(count_sketch(x, plan));
}
BENCHMARK(BM_CountSketch)->Arg(64)->Arg(1024);

struct CriticSetup {
  Dataset ds;
  CriticModel model;
  std::vector<LabeledExample> batch;

  explicit CriticSetup(FusionStrategy fs) {
    SynthConfig sc;
    sc.n_images = 50;
    ds = synth_dataset(sc);
    ModelConfig mc = desk_model_config();
    mc.image_dim = ds.feature_dim();
    mc.fusion.strategy = fs;
    model = make_model(mc, *ds.vocab);
    batch = make_batch(ds, NegativeMixer::all_sources(), "synth", 100, 5);
  }
};

void BM_CriticForward(benchmark::State& state) {
  CriticSetup s(static_cast<FusionStrategy>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss(s.model, s.batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.batch.size()));
}
BENCHMARK(BM_CriticForward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_CriticForwardBackward(benchmark::State& state) {
  CriticSetup s(static_cast<FusionStrategy>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(s.model, s.batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.batch.size()));
}
BENCHMARK(BM_CriticForwardBackward)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

void BM_Bleu4(benchmark::State& state) {
  SynthConfig sc;
  sc.n_images = 20;
  auto ds = synth_dataset(sc);
  std::vector<const Caption*> refs;
  for (const auto& r : ds.images[0].references) refs.push_back(&r);
  const Caption& cand = ds.images[0].generated.at("synth")[0];
  for (auto _ : state) benchmark::DoNotOptimize(bleu(cand, refs, 4));
}
BENCHMARK(BM_Bleu4);

void BM_KendallTau(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = noise(n, 7), y = noise(n, 8);
  for (auto _ : state) benchmark::DoNotOptimize(kendall_tau(x, y));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_KendallTau)->RangeMultiplier(8)->Range(64, 32768)->Complexity(benchmark::oNLogN);

}  // namespace

int main(int argc, char** argv) {
  retain_freed_memory();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
