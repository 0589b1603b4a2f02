#include <benchmark/benchmark.h>

#include <vector>

#include "glassbox/explainers.hpp"
#include "glassbox/interpretcc.hpp"
#include "glassbox/model.hpp"
#include "glassbox/rng.hpp"

namespace {

using namespace glassbox;

constexpr std::size_t kFeatures = 12;

std::vector<std::vector<double>> inputs(std::size_t d) {
  Rng rng(7);
  std::vector<std::vector<double>> xs(64, std::vector<double>(d));
  for (auto& x : xs)
    for (auto& v : x) v = rng.normal();
  return xs;
}

InterpretCCModel make_moe() {
  InterpretCCConfig c;
  c.groups = FeatureGroupSpec::contiguous(kFeatures, 3);
  Rng rng(1);
  return InterpretCCModel(c, rng);
}

void BM_InterpretCCPredict(benchmark::State& state) {
  auto moe = make_moe();
  auto xs = inputs(kFeatures);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(moe.predict(xs[i++ % xs.size()]));
}
BENCHMARK(BM_InterpretCCPredict);

void BM_InterpretCCExplain(benchmark::State& state) {
  auto moe = make_moe();
  auto xs = inputs(kFeatures);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(moe.explain(xs[i++ % xs.size()]));
}
BENCHMARK(BM_InterpretCCExplain);

// Dense comparator of roughly the same parameter count as the default model.
void BM_MlpForward(benchmark::State& state) {
  MlpConfig c;
  c.input_dim = kFeatures;
  c.hidden = {static_cast<std::size_t>(state.range(0))};
  c.output_dim = 2;
  Rng rng(1);
  MlpClassifier mlp(c, rng);
  auto xs = inputs(kFeatures);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(mlp.predict_proba(xs[i++ % xs.size()]));
}
BENCHMARK(BM_MlpForward)->Arg(44);

void BM_ShapleyExact(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  MlpConfig c;
  c.input_dim = d;
  c.hidden = {16};
  c.output_dim = 2;
  Rng rng(1);
  MlpClassifier mlp(c, rng);
  auto f = BlackBox::from_model(mlp);
  auto x = inputs(d).front();
  std::vector<double> baseline(d, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(shapley_exact(f, x, baseline, 1));
  state.SetComplexityN(static_cast<benchmark::IterationCount>(1) << d);
}
BENCHMARK(BM_ShapleyExact)->DenseRange(8, 12)->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);

}  // namespace

BENCHMARK_MAIN();
