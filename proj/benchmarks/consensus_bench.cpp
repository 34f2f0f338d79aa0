#include <benchmark/benchmark.h>

#include <random>

#include "ssbc/agreement.hpp"
#include "ssbc/ssbc_annotator.hpp"

using namespace ssbc;

namespace {

void BM_ConsensusAllTriples(benchmark::State& state) {
  for (auto _ : state) {
    int total = 0;
    for (LabelMask a = 0; a < 16; ++a)
      for (LabelMask b = 0; b < 16; ++b)
        for (LabelMask c = 0; c < 16; ++c) total += consensus_of({a, b, c}).labels.size();
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_ConsensusAllTriples);

void BM_PairwiseF1(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::vector<LabelMask> a(10000), b(10000);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<LabelMask>(rng() & 0xfff);
    b[i] = static_cast<LabelMask>(rng() & 0xfff);
  }
  for (auto _ : state) benchmark::DoNotOptimize(pairwise_f1(a, b));
}
BENCHMARK(BM_PairwiseF1);

}  // namespace
