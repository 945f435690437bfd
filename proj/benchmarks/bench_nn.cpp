// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>

#include "ddc/builtins.hpp"
#include "ddc/distill.hpp"
#include "ddc/nn.hpp"
#include "ddc/rng.hpp"

namespace {

ddc::Model make_model(const char* family) {
  return ddc::Model::instantiate(ddc::builtin_architecture(family, 10), 1);
}

Eigen::MatrixXd random_batch(const ddc::Model& m, int batch) {
  std::mt19937_64 rng(3);
  Eigen::MatrixXd x(m.input_size(), batch);
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = ddc::uniform01(rng) - 0.5;
  return x;
}

void BM_forward_desk(benchmark::State& state) {
  ddc::Model m = make_model("desk");
  Eigen::MatrixXd x = random_batch(m, static_cast<int>(state.range(0)));
  for (auto _ : state) {
    Eigen::MatrixXd logits = m.forward(x);
    benchmark::DoNotOptimize(logits);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_forward_desk)->Arg(1)->Arg(32);

void BM_train_step_desk(benchmark::State& state) {
  ddc::Model m = make_model("desk");
  const int batch = static_cast<int>(state.range(0));
  Eigen::MatrixXd x = random_batch(m, batch);
  std::vector<int> labels(static_cast<size_t>(batch));
  for (int i = 0; i < batch; ++i) labels[static_cast<size_t>(i)] = i % 10;
  ddc::DistillConfig hard;
  hard.mode = ddc::DistillMode::hard_only;
  ddc::Model::Cache cache;
  ddc::Model::Gradients velocity;
  for (auto _ : state) {
    Eigen::MatrixXd logits = m.forward_train(x, cache);
    Eigen::MatrixXd dlogits;
    double loss = ddc::kd_loss_with_grad(logits, logits, labels, hard, dlogits);
    ddc::Model::Gradients grads = m.zero_gradients();
    m.backward(cache, dlogits, grads);
    m.apply_sgd(grads, velocity, 0.001, 0.9);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_train_step_desk)->Arg(32);

void BM_forward_vgg11(benchmark::State& state) {
  ddc::Model m = make_model("vgg11");
  Eigen::MatrixXd x = random_batch(m, 1);
  for (auto _ : state) {
    Eigen::MatrixXd logits = m.forward(x);
    benchmark::DoNotOptimize(logits);
  }
}
BENCHMARK(BM_forward_vgg11);

}  // namespace
