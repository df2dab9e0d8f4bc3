#include "dpplearn/kernels.hpp"
#include "dpplearn/likelihood.hpp"
#include "dpplearn/sampling.hpp"
#include "dpplearn/spectral.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace dpplearn;

namespace {

std::vector<double> random_spectrum(std::size_t n) {
  std::mt19937_64 rng(1);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = 1000.0 * e(rng);
  return v;
}

MatrixXd grid_kernel(std::size_t side) {
  const double off = -0.5 * static_cast<double>(side - 1);
  return build_discrete_kernel(lattice({side, side}, 1.0, {off, off}), {{0.5 * side, 0.5 * side}, {0.1, 0.2}}).L;
}

void BM_ElementarySymmetric(benchmark::State& state) {
  const auto lam = random_spectrum(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(elementary_symmetric(lam, 10).log_value);
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_ElementarySymmetric)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oN);

void BM_EnumerateEigenvalues(benchmark::State& state) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  for (auto _ : state) benchmark::DoNotOptimize(enumerate_eigenvalues(th, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_EnumerateEigenvalues)->RangeMultiplier(4)->Range(64, 16384);

void BM_DppBoundsFromTruncation(benchmark::State& state) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  const GaussianOperatorSpectrum source(th);
  const auto t = source.top(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(dpp_log_normalizer_bounds(t).log_upper);
}
BENCHMARK(BM_DppBoundsFromTruncation)->RangeMultiplier(4)->Range(64, 4096);

void BM_KdppBoundsFromTruncation(benchmark::State& state) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  const GaussianOperatorSpectrum source(th);
  const auto t = source.top(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(kdpp_log_normalizer_bounds(t, 10).log_upper);
}
BENCHMARK(BM_KdppBoundsFromTruncation)->RangeMultiplier(4)->Range(64, 4096);

void BM_DiscreteLogLikelihood(benchmark::State& state) {
  const auto side = static_cast<std::size_t>(state.range(0));
  const MatrixXd L = grid_kernel(side);
  std::vector<IndexSet> data;
  SamplerRng rng(2);
  const DppSampler sampler(L);
  for (int t = 0; t < 20; ++t) data.push_back(sampler.sample_dpp(rng));
  for (auto _ : state) benchmark::DoNotOptimize(dpp_log_likelihood(L, data));
}
BENCHMARK(BM_DiscreteLogLikelihood)->Arg(10)->Arg(20)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_ContinuousLogLikelihood(benchmark::State& state) {
  const auto th = GaussianTheta::isotropic(1000, 1, 1, 2);
  const auto data = sample_continuous_via_grid(th, GridSpec::with_spacing({-4, -4}, {4, 4}, 0.25), 20, 3);
  const ContinuousGaussianModel model(2, true, data, Process::Dpp);
  const std::vector<double> theta{1000, 1, 1};
  for (auto _ : state) benchmark::DoNotOptimize(model.log_likelihood(theta));
}
BENCHMARK(BM_ContinuousLogLikelihood)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
