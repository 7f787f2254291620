#include <benchmark/benchmark.h>
#include "gradsplit/tape.hpp"
using namespace gradsplit;
static void BM_MatMul(benchmark::State& state) {
    Rng rng(1);
    const std::int64_t n = state.range(0);
    Tensor a = Tensor::uniform({n, n}, -1, 1, rng);
    Tensor b = Tensor::uniform({n, n}, -1, 1, rng);
    for (auto _ : state) {
        Tape tape(false);
        Tensor c = matmul(tape, a, b);
        benchmark::DoNotOptimize(c.data());
    }
}
BENCHMARK(BM_MatMul)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK_MAIN();
