// Forward-pass cost of the four attention mechanisms on a stage-2-sized grid.

#include <benchmark/benchmark.h>

#include "sviptr/attention.hpp"

namespace {

using namespace sviptr;

constexpr int64_t kB = 1, kH = 4, kW = 24, kC = 128, kHeads = 4;

template <typename Maker>
void run_mechanism(benchmark::State& state, const Maker& make) {
  ParamStore<float> ps;
  Rng rng(7, 0);
  auto attn = make(ps, rng);
  Tensor<float> x({kB, kH * kW, kC});
  Rng drng(8, 0);
  for (int64_t i = 0; i < x.numel(); ++i)
    x[i] = static_cast<float>(drng.uniform(-1.0, 1.0));
  for (auto _ : state) {
    Graph<float> g(false);
    auto y = attn.forward(g, make_leaf<float>(x.clone(), "x"), kB, kH, kW);
    benchmark::DoNotOptimize(y->value.data());
  }
}

void BM_StripedLocal(benchmark::State& state) {
  run_mechanism(state, [](ParamStore<float>& ps, Rng& rng) {
    return CSWinAttn<float>::make(ps, "a", kC, kHeads, 2, PeKind::LePE, rng);
  });
}

void BM_DecayLocal(benchmark::State& state) {
  run_mechanism(state, [](ParamStore<float>& ps, Rng& rng) {
    return DMaSAAttn<float>::make(ps, "a", kC, kHeads, rng);
  });
}

void BM_FullGlobal(benchmark::State& state) {
  run_mechanism(state, [](ParamStore<float>& ps, Rng& rng) {
    return MhsaAttn<float>::make(ps, "a", kC, kHeads, PeKind::LePE, rng);
  });
}

void BM_ReducedGlobal(benchmark::State& state) {
  run_mechanism(state, [](ParamStore<float>& ps, Rng& rng) {
    return OsraAttn<float>::make(ps, "a", kC, kHeads, 2, rng);
  });
}

}  // namespace

BENCHMARK(BM_StripedLocal);
BENCHMARK(BM_DecayLocal);
BENCHMARK(BM_FullGlobal);
BENCHMARK(BM_ReducedGlobal);
