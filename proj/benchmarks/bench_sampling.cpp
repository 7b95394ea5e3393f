#include <benchmark/benchmark.h>

#include <random>

#include "catdiff/corpus.hpp"
#include "catdiff/denoiser.hpp"
#include "catdiff/diffusion.hpp"
#include "catdiff/schedule.hpp"
#include "catdiff/transition.hpp"

namespace {

struct Fixture {
  catdiff::NoiseSchedule schedule;
  catdiff::TransitionModel model;
  catdiff::OracleDenoiser denoiser;

  explicit Fixture(int T)
      : schedule(catdiff::build_linear_schedule(catdiff::MatrixKind::MaskUniform, 4, T,
                                                {0.0, 0.9})),
        model(schedule),
        denoiser(model, make_entries(), /*joint_mode=*/true) {}

  static std::vector<catdiff::OracleDenoiser::Entry> make_entries() {
    catdiff::SynthSpec spec;
    spec.K = 4;
    spec.N = 2;
    spec.sequences_per_condition = 3;
    std::vector<catdiff::OracleDenoiser::Entry> entries;
    for (const auto& e : catdiff::synth_dataset(spec)) {
      entries.push_back({e.cond, e.tokens, e.weight});
    }
    return entries;
  }
};

void BM_InferAtStride(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  const int stride = static_cast<int>(state.range(1));
  Fixture fx(T);
  std::mt19937_64 rng(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(catdiff::infer(fx.model, fx.denoiser, {0}, 2, stride, rng));
  }
  state.counters["reverse_steps"] =
      static_cast<double>(catdiff::stride_schedule(T, stride).size() - 1);
}

void BM_ForwardSample(benchmark::State& state) {
  const int T = static_cast<int>(state.range(0));
  Fixture fx(T);
  std::mt19937_64 rng(0);
  const catdiff::TokenSequence x0{1, 2};
  for (auto _ : state) {
    benchmark::DoNotOptimize(catdiff::forward_sample(fx.model, x0, T, rng));
  }
}

}  // namespace

BENCHMARK(BM_InferAtStride)
    ->Args({100, 1})
    ->Args({100, 3})
    ->Args({100, 5})
    ->Args({100, 7})
    ->Args({50, 1})
    ->Args({50, 5})
    ->Args({25, 1})
    ->Args({25, 5});
BENCHMARK(BM_ForwardSample)->Arg(25)->Arg(100);

BENCHMARK_MAIN();
