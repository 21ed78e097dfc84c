// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include "scrubkit/kernels.hpp"
#include "scrubkit/random.hpp"

using namespace scrubkit;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Matrix one_hot(std::size_t rows, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  Matrix z(rows, k);
  for (std::size_t i = 0; i < rows; ++i) z(i, rng.below(k)) = 1.0;
  return z;
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) {
    Matrix c = Parallel ? kernels::matmul(a, b) : kernels::serial::matmul(a, b);
    benchmark::DoNotOptimize(c.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

template <bool Parallel>
void BM_BlockMoments(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto h = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(rows, h, 3), z = one_hot(rows, 2, 4);
  for (auto _ : state) {
    auto m = Parallel ? kernels::block_moments(x, z) : kernels::serial::block_moments(x, z);
    benchmark::DoNotOptimize(m.comoment_xx.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

template <bool Parallel>
void BM_AffineErase(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto h = static_cast<std::size_t>(state.range(1));
  const Matrix x = random_matrix(rows, h, 5), a = random_matrix(h, h, 6);
  const Vector center(h, 0.25);
  for (auto _ : state) {
    Matrix out = Parallel ? kernels::affine_erase_rows(x, a, center) : kernels::serial::affine_erase_rows(x, a, center);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

}  // namespace

BENCHMARK(BM_Matmul<false>)->Name("matmul/serial")->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Matmul<true>)->Name("matmul/openmp")->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_BlockMoments<false>)->Name("block_moments/serial")->Args({20000, 64})->Args({20000, 256})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BlockMoments<true>)->Name("block_moments/openmp")->Args({20000, 64})->Args({20000, 256})
    ->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_AffineErase<false>)->Name("affine_erase/serial")->Args({20000, 64})->Args({20000, 256})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AffineErase<true>)->Name("affine_erase/openmp")->Args({20000, 64})->Args({20000, 256})
    ->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
