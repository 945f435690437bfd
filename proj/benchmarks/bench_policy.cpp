// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "ddc/builtins.hpp"
#include "ddc/policy.hpp"

namespace {

void BM_sample_trajectories(benchmark::State& state) {
  const ddc::ArchitectureSpec teacher = ddc::vgg11(10);
  const ddc::PolicyEncoding enc = ddc::encode_policy_context(teacher);
  const ddc::PolicyParameters params =
      ddc::init_policy(ddc::kEncodingWidth, static_cast<int>(state.range(0)), 1);
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    auto trajs = ddc::sample_trajectories(params, enc.rows, enc.action_rows, 5, rng);
    benchmark::DoNotOptimize(trajs);
  }
}
BENCHMARK(BM_sample_trajectories)->Arg(32)->Arg(64);

void BM_log_prob_gradient(benchmark::State& state) {
  const ddc::ArchitectureSpec teacher = ddc::vgg11(10);
  const ddc::PolicyEncoding enc = ddc::encode_policy_context(teacher);
  const ddc::PolicyParameters params =
      ddc::init_policy(ddc::kEncodingWidth, static_cast<int>(state.range(0)), 1);
  std::mt19937_64 rng(2);
  auto trajs = ddc::sample_trajectories(params, enc.rows, enc.action_rows, 1, rng);
  ddc::PolicyGradients grads = ddc::zero_gradients(params);
  for (auto _ : state) {
    double lp = ddc::accumulate_log_prob_gradient(params, enc.rows, enc.action_rows,
                                                  trajs[0].actions, 1.0, grads);
    benchmark::DoNotOptimize(lp);
  }
}
BENCHMARK(BM_log_prob_gradient)->Arg(32)->Arg(64);

}  // namespace
