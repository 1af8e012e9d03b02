// Serial reference vs OpenMP masked convolution kernels.
// Run: wstan_bench [--benchmark_filter=...]; set OMP_NUM_THREADS to compare.

#include <benchmark/benchmark.h>

#include <vector>

#include "wstan/grid_mask.hpp"
#include "wstan/kernels/conv2d.hpp"
#include "wstan/random.hpp"

namespace {

using namespace wstan;

struct Problem {
  kernels::ConvGeometry g;
  std::vector<double> in, kernel, grad_out, out;
  GridMask mask;

  Problem(std::size_t n, std::size_t ch, std::size_t k) : mask(GridMask::upper_triangle(n)) {
    g = {n, k, ch, ch};
    Rng rng(1);
    in = uniform_values(rng, g.map_size(), -1, 1);
    kernel = uniform_values(rng, g.kernel_size(), -0.1, 0.1);
    grad_out = uniform_values(rng, g.out_size(), -1, 1);
    out.assign(g.out_size(), 0.0);
  }
  double macs() const { return double(g.n * g.n * g.k * g.k * g.in_ch * g.out_ch); }
};

template <auto Fn>
void forward(benchmark::State& state) {
  Problem p(state.range(0), state.range(1), 3);
  for (auto _ : state) {
    Fn(p.g, p.in, p.kernel, p.mask.valid, p.out);
    benchmark::DoNotOptimize(p.out.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(p.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Fn>
void backward_input(benchmark::State& state) {
  Problem p(state.range(0), state.range(1), 3);
  std::vector<double> grad(p.g.map_size());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    Fn(p.g, p.grad_out, p.kernel, p.mask.valid, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(p.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

template <auto Fn>
void backward_kernel(benchmark::State& state) {
  Problem p(state.range(0), state.range(1), 3);
  std::vector<double> grad(p.g.kernel_size());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    Fn(p.g, p.in, p.grad_out, p.mask.valid, grad);
    benchmark::DoNotOptimize(grad.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(p.macs(), benchmark::Counter::kIsIterationInvariantRate);
}

// {N, channels}: the default model, a wider map, and a long-video map.
#define SIZES ->Args({16, 32})->Args({16, 64})->Args({64, 32})->Unit(benchmark::kMicrosecond)

BENCHMARK(forward<kernels::conv2d_forward_serial>)->Name("forward/serial") SIZES;
BENCHMARK(forward<kernels::conv2d_forward_omp>)->Name("forward/omp") SIZES;
BENCHMARK(backward_input<kernels::conv2d_backward_input_serial>)->Name("backward_input/serial") SIZES;
BENCHMARK(backward_input<kernels::conv2d_backward_input_omp>)->Name("backward_input/omp") SIZES;
BENCHMARK(backward_kernel<kernels::conv2d_backward_kernel_serial>)->Name("backward_kernel/serial") SIZES;
BENCHMARK(backward_kernel<kernels::conv2d_backward_kernel_omp>)->Name("backward_kernel/omp") SIZES;

}  // namespace

BENCHMARK_MAIN();
