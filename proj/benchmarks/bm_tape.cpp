#include <benchmark/benchmark.h>

#include "wran/tape.hpp"

static void BM_Conv1dForwardBackward(benchmark::State& state) {
  const auto len = static_cast<std::size_t>(state.range(0));
  wran::Rng rng(1);
  wran::ParamStore ps;
  ps.add_uniform("x", {len, 32}, 0.1, rng);
  ps.add_uniform("w", {3 * 32, 64}, 0.1, rng);
  ps.add_zeros("b", {1, 64});
  for (auto _ : state) {
    wran::Tape tape;
    auto y = tape.sum(tape.max_pool(tape.tanh(
        tape.conv1d(tape.param(ps, "x"), tape.param(ps, "w"), tape.param(ps, "b"), 3))));
    tape.backward(y);
    benchmark::DoNotOptimize(ps.grad("w")[0]);
  }
}
BENCHMARK(BM_Conv1dForwardBackward)->Arg(16)->Arg(64);
BENCHMARK_MAIN();
