// Serial reference vs OpenMP kernels. Thread count follows OMP_NUM_THREADS.

#include <random>
#include <span>
#include <vector>

#include <benchmark/benchmark.h>

#include "smq/kernels.hpp"
#include "smq/models.hpp"
#include "smq/trajectories.hpp"

namespace {

using CMat = smq::kernels::Matrix<std::complex<double>>;

std::vector<CMat> random_series(int len, int dim, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 0.1);
  std::vector<CMat> out(static_cast<std::size_t>(len), CMat(dim, dim));
  for (auto& m : out)
    for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = {nd(rng), nd(rng)};
  return out;
}

template <bool Serial>
void BM_Convolve(benchmark::State& state) {
  const auto a = random_series(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 1);
  const auto b = random_series(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 2);
  for (auto _ : state) {
    auto c = Serial ? smq::kernels::convolve_serial<std::complex<double>>(a, b, 0.01)
                    : smq::kernels::convolve<std::complex<double>>(a, b, 0.01);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetComplexityN(state.range(0));
}

template <bool Serial>
void BM_Volterra(benchmark::State& state) {
  const auto b = random_series(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 3);
  const auto r = random_series(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), 4);
  const auto side = smq::kernels::Side::left;
  for (auto _ : state) {
    auto x = Serial ? smq::kernels::volterra_second_kind_serial<std::complex<double>>(b, r, 0.01, side)
                    : smq::kernels::volterra_second_kind<std::complex<double>>(b, r, 0.01, side);
    benchmark::DoNotOptimize(x.data());
  }
}

template <bool Serial>
void BM_Ensemble(benchmark::State& state) {
  const auto grid = smq::TimeGrid::over(5.0, 0.01);
  const auto p = smq::models::default_pauli();
  const auto pair = smq::canonical_pair(smq::models::pauli_semimarkov(p.p, p.f, grid));
  smq::Mat rho0 = smq::Mat::Zero(2, 2);
  rho0(0, 0) = 1.0;
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    auto e = Serial ? smq::ensemble_average_serial(pair, rho0, n, 7) : smq::ensemble_average(pair, rho0, n, 7);
    benchmark::DoNotOptimize(e.mean.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

// {grid samples, matrix dimension}; dimension 4 and 9 are superoperators of a qubit and a qutrit
BENCHMARK(BM_Convolve<true>)->Args({501, 4})->Args({1001, 4})->Args({1001, 9})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Convolve<false>)->Args({501, 4})->Args({1001, 4})->Args({1001, 9})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Volterra<true>)->Args({501, 4})->Args({1001, 9})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Volterra<false>)->Args({501, 4})->Args({1001, 9})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ensemble<true>)->Arg(2000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ensemble<false>)->Arg(2000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
