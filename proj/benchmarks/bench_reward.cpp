// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "ddc/reward.hpp"

namespace {

void BM_combined_reward(benchmark::State& state) {
  const ddc::TeacherReference ref{0.92, 0.021, 9750000};
  const ddc::Thresholds th;
  double a = 0.85, t = 0.006;
  long long c = 450000;
  for (auto _ : state) {
    auto r = ddc::combined_reward(a, t, c, ref, th);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_combined_reward);

}  // namespace
