#include <benchmark/benchmark.h>

#include <random>

#include "demix/chunking.hpp"
#include "demix/ensemble.hpp"
#include "demix/metrics.hpp"
#include "demix/separator.hpp"
#include "demix/weight_search.hpp"

namespace {

using namespace demix;

Waveform noise(std::size_t channels, std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.5, 0.5);
  Waveform w(channels, length, 44100);
  for (std::size_t c = 0; c < channels; ++c) {
    for (double& v : w.channel(c)) v = dist(rng);
  }
  return w;
}

SeparatorSpec spec_of(BackendKind kind, std::vector<std::string> stems) {
  SeparatorSpec s;
  s.name = to_string(kind);
  s.kind = kind;
  s.produced_stems = std::move(stems);
  return s;
}

void BM_Sdr(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)) * 44100;
  const Waveform ref = noise(2, n, 1);
  const Waveform est = ref + noise(2, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sdr(ref, est));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_Sdr)->Arg(10)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_OverlapAdd(benchmark::State& state) {
  const std::size_t n = 60 * 44100;
  const double overlap = static_cast<double>(state.range(0)) / 100.0;
  const Waveform x = noise(2, n, 3);
  const ChunkPlan plan = plan_chunks(n, 10 * 44100, overlap);
  std::vector<ChunkPiece> pieces;
  for (std::size_t off : plan.offsets) pieces.emplace_back(off, x.slice(static_cast<std::ptrdiff_t>(off), plan.chunk_len));
  for (auto _ : state) benchmark::DoNotOptimize(overlap_add(pieces, plan, n));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n));
}
BENCHMARK(BM_OverlapAdd)->Arg(0)->Arg(25)->Arg(75)->Unit(benchmark::kMillisecond);

void BM_ChunkedSeparate(benchmark::State& state) {
  const Waveform x = noise(2, 60 * 44100, 4);
  const Separator sep = make_separator(spec_of(BackendKind::kPassthrough, {"mix"}));
  const ChunkParams p{10 * 44100, 0.6, static_cast<std::size_t>(state.range(0)), 22050};
  for (auto _ : state) benchmark::DoNotOptimize(chunked_separate(sep, x, p, {static_cast<unsigned>(state.range(1))}));
}
BENCHMARK(BM_ChunkedSeparate)->Args({1, 1})->Args({1, 4})->Args({5, 4})->Unit(benchmark::kMillisecond);

void BM_Blend(benchmark::State& state) {
  std::vector<Waveform> ests;
  for (std::int64_t k = 0; k < state.range(0); ++k) ests.push_back(noise(2, 30 * 44100, 10 + k));
  const WeightVector w(std::vector<double>(ests.size(), 1.0));
  for (auto _ : state) benchmark::DoNotOptimize(blend_weighted(ests, w));
}
BENCHMARK(BM_Blend)->Arg(3)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_GridSearch(benchmark::State& state) {
  WeightSearchProblem p;
  p.stem = "vocals";
  p.backend_names = {"a", "b", "c"};
  for (int r = 0; r < 4; ++r) {
    const Waveform ref = noise(2, 44100, 100 + r);
    CandidateRecord rec{"r" + std::to_string(r), ref, {}};
    for (int k = 0; k < 3; ++k) rec.estimates.push_back(ref + noise(2, 44100, 200 + 3 * r + k));
    p.records.push_back(std::move(rec));
  }
  const auto grid = integer_grid(3, 0, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(grid_search(p, grid, {static_cast<unsigned>(state.range(1))}));
}
BENCHMARK(BM_GridSearch)->Args({4, 1})->Args({4, 4})->Args({8, 4})->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
