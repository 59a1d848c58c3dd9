// Dense matrix-multiply kernels at the shapes the attention layers hit most.

#include <benchmark/benchmark.h>

#include <vector>

#include "sviptr/gemm.hpp"
#include "sviptr/rng.hpp"

namespace {

void fill(std::vector<float>& v, uint64_t seed) {
  sviptr::Rng rng(seed, 0);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

void BM_GemmNN(benchmark::State& state) {
  const int64_t m = state.range(0), k = state.range(1), n = state.range(2);
  std::vector<float> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(k * n)),
      c(static_cast<size_t>(m * n));
  fill(a, 1);
  fill(b, 2);
  for (auto _ : state) {
    sviptr::mm::gemm_nn(a.data(), b.data(), c.data(), m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * m * k * n);
}

void BM_GemmNT(benchmark::State& state) {
  const int64_t m = state.range(0), k = state.range(1), n = state.range(2);
  std::vector<float> a(static_cast<size_t>(m * k)), b(static_cast<size_t>(n * k)),
      c(static_cast<size_t>(m * n));
  fill(a, 3);
  fill(b, 4);
  for (auto _ : state) {
    sviptr::mm::gemm_nt(a.data(), b.data(), c.data(), m, k, n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * m * k * n);
}

}  // namespace

// Token counts per stage at 32x96 input: 192, 96, 48, 24; qkv projections and
// attention score products dominate.
BENCHMARK(BM_GemmNN)->Args({192, 64, 192})->Args({96, 128, 384})->Args({24, 192, 576});
BENCHMARK(BM_GemmNT)->Args({192, 32, 192})->Args({96, 32, 96})->Args({24, 24, 24});
