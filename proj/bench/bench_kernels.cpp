#include <benchmark/benchmark.h>

#include <vector>

#include "dlgnet/kernels.hpp"
#include "dlgnet/rng.hpp"
#include "dlgnet/window.hpp"

using namespace dlg;

namespace {

std::vector<Real> random_values(std::size_t n, std::uint64_t seed) {
  SeededRng rng(seed);
  std::vector<Real> v(n);
  for (Real& x : v) x = static_cast<Real>(rng.uniform(-1, 1));
  return v;
}

// Args: spatial side, channels.
template <auto Kernel>
void conv_forward(benchmark::State& state) {
  const std::size_t side = state.range(0), c = state.range(1);
  const auto g = kernels::conv_geometry({4, c, side, side}, {c, c, 3, 3}, 1, 1);
  const auto x = random_values(4 * c * side * side, 1), w = random_values(c * c * 9, 2), b = random_values(c, 3);
  std::vector<Real> y(4 * c * side * side);
  for (auto _ : state) {
    Kernel(g, x, w, b, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * 4 * c * c * 9 * side * side);
}

template <auto Kernel>
void conv_backward(benchmark::State& state) {
  const std::size_t side = state.range(0), c = state.range(1);
  const auto g = kernels::conv_geometry({4, c, side, side}, {c, c, 3, 3}, 1, 1);
  const auto x = random_values(4 * c * side * side, 1), w = random_values(c * c * 9, 2);
  const auto dy = random_values(x.size(), 3);
  std::vector<Real> dx(x.size()), dw(w.size()), db(c);
  for (auto _ : state) {
    Kernel(g, x, w, dy, dx, dw, db);
    benchmark::DoNotOptimize(dx.data());
  }
}

// Args: spatial side, slices.
template <auto Kernel>
void focal_attention(benchmark::State& state) {
  const std::size_t side = state.range(0), n = state.range(1), c = 16;
  const NeighborIndex index(WindowSpec{}, side, side);
  const kernels::AttentionGeometry g{n, c, c};
  const std::size_t feat = n * side * side * c;
  const auto q = random_values(feat, 1), k = random_values(feat, 2), v = random_values(feat, 3);
  std::vector<Real> out(feat), alpha(side * side * n * index.slots() * n);
  for (auto _ : state) {
    Kernel(g, index, q, k, v, out, alpha);
    benchmark::DoNotOptimize(out.data());
  }
}

template <auto Kernel>
void guidance_attention(benchmark::State& state) {
  const std::size_t side = state.range(0), n = state.range(1), c = 16;
  const NeighborIndex index(WindowSpec{}, side, side);
  const kernels::AttentionGeometry g{n, 1, c};
  const std::size_t plane = side * side;
  const auto ts = random_values(n * plane, 1), gs = random_values(plane, 2), gv = random_values(plane * c, 3);
  std::vector<Real> out(n * plane * c), alpha(plane * n * index.slots());
  for (auto _ : state) {
    Kernel(g, index, ts, gs, gv, out, alpha);
    benchmark::DoNotOptimize(out.data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  for (int side : {16, 32, 64}) b->Args({side, 16});
  b->Args({32, 32});
}

void attention_args(benchmark::internal::Benchmark* b) {
  for (int side : {16, 32, 64}) b->Args({side, 4});
  b->Args({32, 12});
}

}  // namespace

BENCHMARK(conv_forward<kernels::serial::conv2d_forward>)->Name("conv_forward/serial")->Apply(conv_args);
BENCHMARK(conv_forward<kernels::parallel::conv2d_forward>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(conv_backward<kernels::serial::conv2d_backward>)->Name("conv_backward/serial")->Apply(conv_args);
BENCHMARK(conv_backward<kernels::parallel::conv2d_backward>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(focal_attention<kernels::serial::focal_attention_forward>)
    ->Name("focal_attention/serial")
    ->Apply(attention_args);
BENCHMARK(focal_attention<kernels::parallel::focal_attention_forward>)
    ->Name("focal_attention/parallel")
    ->Apply(attention_args);
BENCHMARK(guidance_attention<kernels::serial::guidance_attention_forward>)
    ->Name("guidance_attention/serial")
    ->Apply(attention_args);
BENCHMARK(guidance_attention<kernels::parallel::guidance_attention_forward>)
    ->Name("guidance_attention/parallel")
    ->Apply(attention_args);

BENCHMARK_MAIN();
