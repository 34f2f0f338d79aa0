#include <benchmark/benchmark.h>

#include <random>

#include "ssbc/stats/contingency.hpp"
#include "ssbc/stats/logistic.hpp"
#include "ssbc/stats/random_intercept.hpp"

using namespace ssbc::stats;

namespace {

struct Data {
  Design x;
  std::vector<int> y;
  std::vector<std::string> clusters;
};

Data make_data(std::size_t groups, std::size_t per_group) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01(0.0, 1.0);
  Data d;
  d.x = Design(groups * per_group, {"(Intercept)", "x"});
  std::size_t r = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const double u = n01(rng);
    for (std::size_t i = 0; i < per_group; ++i, ++r) {
      d.x(r, 0) = 1.0;
      d.x(r, 1) = n01(rng);
      const double eta = -0.5 + 0.8 * d.x(r, 1) + u;
      d.y.push_back(std::uniform_real_distribution<double>(0, 1)(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0);
      d.clusters.push_back("g" + std::to_string(g));
    }
  }
  return d;
}

void BM_ChiSquare3x2(benchmark::State& state) {
  const CountTable t{3, 2, {120, 80, 60, 90, 30, 140}};
  for (auto _ : state) benchmark::DoNotOptimize(chi_square(t));
}
BENCHMARK(BM_ChiSquare3x2);

void BM_BhFdr(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::vector<double> p(static_cast<std::size_t>(state.range(0)));
  for (auto& v : p) v = std::uniform_real_distribution<double>(0, 1)(rng);
  for (auto _ : state) benchmark::DoNotOptimize(bh_fdr(p));
}
BENCHMARK(BM_BhFdr)->Arg(12)->Arg(1000);

void BM_FitLogistic(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)) / 10, 10);
  for (auto _ : state) benchmark::DoNotOptimize(fit_logistic(d.x, d.y));
}
BENCHMARK(BM_FitLogistic)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_ClusteredSe(benchmark::State& state) {
  const auto d = make_data(500, 10);
  const auto fit = fit_logistic(d.x, d.y);
  for (auto _ : state) benchmark::DoNotOptimize(clustered_se(fit, d.x, d.y, d.clusters));
}
BENCHMARK(BM_ClusteredSe)->Unit(benchmark::kMillisecond);

void BM_RandomIntercept(benchmark::State& state) {
  const auto d = make_data(static_cast<std::size_t>(state.range(0)), 8);
  for (auto _ : state) benchmark::DoNotOptimize(fit_random_intercept_logit(d.x, d.y, d.clusters));
}
BENCHMARK(BM_RandomIntercept)->Arg(100)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace
