#include <benchmark/benchmark.h>

#include <vector>

#include "tsaug/kernels.hpp"
#include "tsaug/rng.hpp"

namespace {

using namespace tsaug;
using kernels::Trans;

std::vector<double> random_vector(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

template <bool Reference>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vector(n * n, 1), b = random_vector(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Reference)
      kernels::reference::gemm(Trans::no, Trans::no, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    else
      kernels::gemm(Trans::no, Trans::no, n, n, n, a.data(), n, b.data(), n, c.data(), n, false);
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

// One classifier-sized layer: batch 64, 128 -> 128 channels, T = 64.
kernels::Conv1dShape conv_shape(std::size_t width) { return {64, 128, 128, 64, width}; }

template <bool Reference>
void BM_ConvForward(benchmark::State& state) {
  const auto s = conv_shape(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vector(s.batch * s.in_channels * s.length, 3);
  const auto w = random_vector(s.out_channels * s.in_channels * s.width, 4);
  const auto bias = random_vector(s.out_channels, 5);
  std::vector<double> out(s.batch * s.out_channels * s.length);
  for (auto _ : state) {
    if constexpr (Reference)
      kernels::reference::conv1d_forward(s, x, w, bias, out);
    else
      kernels::conv1d_forward(s, x, w, bias, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Reference>
void BM_ConvBackward(benchmark::State& state) {
  const auto s = conv_shape(static_cast<std::size_t>(state.range(0)));
  const auto x = random_vector(s.batch * s.in_channels * s.length, 3);
  const auto w = random_vector(s.out_channels * s.in_channels * s.width, 4);
  const auto gout = random_vector(s.batch * s.out_channels * s.length, 6);
  std::vector<double> gx(x.size()), gw(w.size()), gb(s.out_channels);
  for (auto _ : state) {
    if constexpr (Reference)
      kernels::reference::conv1d_backward(s, x, w, gout, gx, gw, gb);
    else
      kernels::conv1d_backward(s, x, w, gout, gx, gw, gb);
    benchmark::DoNotOptimize(gx.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/reference")->Arg(64)->Arg(256);
BENCHMARK(BM_Gemm<false>)->Name("gemm/parallel")->Arg(64)->Arg(256)->Arg(512);
BENCHMARK(BM_ConvForward<true>)->Name("conv1d_forward/reference")->Arg(3)->Arg(7);
BENCHMARK(BM_ConvForward<false>)->Name("conv1d_forward/parallel")->Arg(3)->Arg(7);
BENCHMARK(BM_ConvBackward<true>)->Name("conv1d_backward/reference")->Arg(3)->Arg(7);
BENCHMARK(BM_ConvBackward<false>)->Name("conv1d_backward/parallel")->Arg(3)->Arg(7);

BENCHMARK_MAIN();
