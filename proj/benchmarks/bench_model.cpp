// End-to-end forward latency of the four production variants.

#include <benchmark/benchmark.h>

#include "sviptr/backbone.hpp"
#include "sviptr/registry.hpp"

namespace {

using namespace sviptr;

void run_variant(benchmark::State& state, const char* name) {
  VariantConfig cfg = registry_variant(name);
  cfg.num_classes = 37;
  auto model = Model<float>::build(cfg, 1, 32, 96);
  Tensor<float> im({1, 3, 32, 96});
  Rng rng(2, 0);
  for (int64_t i = 0; i < im.numel(); ++i)
    im[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Graph<float> g(false);
    auto out = model.forward(g, make_leaf<float>(im.clone(), "im"));
    benchmark::DoNotOptimize(out.logits->value.data());
  }
}

void BM_V1Tiny(benchmark::State& state) { run_variant(state, "sviptr-v1-t"); }
void BM_V2Tiny(benchmark::State& state) { run_variant(state, "sviptr-v2-t"); }
void BM_V2Base(benchmark::State& state) { run_variant(state, "sviptr-v2-b"); }
void BM_V1Large(benchmark::State& state) { run_variant(state, "sviptr-v1-l"); }

}  // namespace

BENCHMARK(BM_V1Tiny)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_V2Tiny)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_V2Base)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_V1Large)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
