// SPDX-License-Identifier: Apache-2.0
#include "ddc/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numeric>

#include "ddc/rng.hpp"

namespace ddc {

const char* to_string(DistillMode mode) {
  return mode == DistillMode::soft_and_hard ? "soft_and_hard" : "hard_only";
}

DistillMode distill_mode_from_string(const std::string& s) {
  if (s == "soft_and_hard") return DistillMode::soft_and_hard;
  if (s == "hard_only") return DistillMode::hard_only;
  throw std::invalid_argument("unknown distillation mode: " + s);
}

namespace {

// Column-wise log-softmax, numerically stable for any finite logits.
Eigen::MatrixXd log_softmax(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out = logits;
  for (Eigen::Index j = 0; j < out.cols(); ++j) {
    const double mx = out.col(j).maxCoeff();
    out.col(j).array() -= mx;
    const double lse = std::log(out.col(j).array().exp().sum());
    out.col(j).array() -= lse;
  }
  return out;
}

void check_kd_inputs(const Eigen::MatrixXd& student, const Eigen::MatrixXd& teacher,
                     const std::vector<int>& labels, const DistillConfig& cfg) {
  if (student.rows() != teacher.rows() || student.cols() != teacher.cols())
    throw std::invalid_argument("student and teacher logit shapes differ");
  if (static_cast<Eigen::Index>(labels.size()) != student.cols())
    throw std::invalid_argument("label count does not match batch size");
  if (!(cfg.lambda_soft >= 0.0 && cfg.lambda_soft <= 1.0))
    throw std::invalid_argument("lambda_soft must lie in [0,1]");
  if (!(cfg.temperature > 0.0)) throw std::invalid_argument("temperature must be > 0");
  if (!student.allFinite() || !teacher.allFinite())
    throw std::invalid_argument("non-finite logits");
  for (int y : labels)
    if (y < 0 || y >= student.rows()) throw std::invalid_argument("label out of range");
}

}  // namespace

double kd_loss(const Eigen::MatrixXd& student_logits, const Eigen::MatrixXd& teacher_logits,
               const std::vector<int>& labels, const DistillConfig& cfg) {
  Eigen::MatrixXd unused;
  return kd_loss_with_grad(student_logits, teacher_logits, labels, cfg, unused);
}

double kd_loss_with_grad(const Eigen::MatrixXd& student_logits,
                         const Eigen::MatrixXd& teacher_logits, const std::vector<int>& labels,
                         const DistillConfig& cfg, Eigen::MatrixXd& dlogits) {
  check_kd_inputs(student_logits, teacher_logits, labels, cfg);
  const Eigen::Index batch = student_logits.cols();
  const double inv_n = 1.0 / static_cast<double>(batch);

  const Eigen::MatrixXd ls_student = log_softmax(student_logits);
  const Eigen::MatrixXd p_student = ls_student.array().exp().matrix();

  // Hard term: plain cross-entropy of the student against the labels.
  double hard = 0.0;
  Eigen::MatrixXd dhard = p_student;
  for (Eigen::Index j = 0; j < batch; ++j) {
    hard -= ls_student(labels[static_cast<size_t>(j)], j);
    dhard(labels[static_cast<size_t>(j)], j) -= 1.0;
  }
  hard *= inv_n;
  dhard *= inv_n;

  if (cfg.mode == DistillMode::hard_only) {
    dlogits = std::move(dhard);
    return hard;
  }

  // Soft term: KL(student || teacher) at the configured temperature,
  // scaled by T^2 so gradients stay comparable across temperatures.
  const double T = cfg.temperature;
  const Eigen::MatrixXd ls_s_T =
      T == 1.0 ? ls_student : log_softmax((student_logits / T).eval());
  const Eigen::MatrixXd ls_t_T =
      T == 1.0 ? log_softmax(teacher_logits) : log_softmax((teacher_logits / T).eval());
  const Eigen::MatrixXd p_s_T = ls_s_T.array().exp().matrix();
  const Eigen::MatrixXd diff = ls_s_T - ls_t_T;  // log(p_s/p_t)

  double soft = 0.0;
  Eigen::MatrixXd dsoft(student_logits.rows(), batch);
  for (Eigen::Index j = 0; j < batch; ++j) {
    const double kl = p_s_T.col(j).dot(diff.col(j));
    soft += kl;
    // d/dz_k = p_k*(log(p_k/q_k) - KL) through the softmax, then the 1/T
    // chain from z/T cancels against the T^2 scale to leave a factor T.
    dsoft.col(j) =
        p_s_T.col(j).cwiseProduct(diff.col(j) - Eigen::VectorXd::Constant(diff.rows(), kl)) *
        T;
  }
  soft *= T * T * inv_n;
  dsoft *= inv_n;

  dlogits = cfg.lambda_soft * dsoft + (1.0 - cfg.lambda_soft) * dhard;
  return cfg.lambda_soft * soft + (1.0 - cfg.lambda_soft) * hard;
}

namespace {

// Fisher-Yates with our own uniform; keeps epoch ordering bit-stable across
// standard libraries.
void shuffle_indices(std::vector<int>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    const size_t j = static_cast<size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[j < i ? j : i - 1]);
  }
}

// Horizontal flip + pad-4 random crop, applied to raw pixel indices; the
// batch is materialized by remapping source coordinates.
void augment_batch(Eigen::MatrixXd& batch, int channels, int h, int w, std::mt19937_64& rng) {
  const int plane = h * w;
  Eigen::VectorXd tmp(batch.rows());
  for (Eigen::Index img = 0; img < batch.cols(); ++img) {
    const bool flip = uniform01(rng) < 0.5;
    const int dy = static_cast<int>(uniform01(rng) * 9.0) - 4;
    const int dx = static_cast<int>(uniform01(rng) * 9.0) - 4;
    tmp.setZero();
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < h; ++y) {
        const int sy = y + dy;
        if (sy < 0 || sy >= h) continue;
        for (int x = 0; x < w; ++x) {
          int sx = x + dx;
          if (sx < 0 || sx >= w) continue;
          if (flip) sx = w - 1 - sx;
          tmp(c * plane + y * w + x) = batch(c * plane + sy * w + sx, img);
        }
      }
    }
    batch.col(img) = tmp;
  }
}

}  // namespace

TrainedStudent train_student(const ArchitectureSpec& arch, const Model& teacher,
                             const Dataset& train_split, const DistillConfig& cfg,
                             std::uint64_t seed, const std::vector<int>* teacher_logit_rows) {
  if (train_split.size() == 0) throw std::invalid_argument("empty training split");
  if (cfg.epochs < 0 || cfg.batch_size < 1)
    throw std::invalid_argument("invalid distillation config");

  TrainedStudent out{Model::instantiate(arch, mix_seed(seed, 0x1017)), {}};
  Model& student = out.model;
  if (student.num_classes() != train_split.num_classes)
    throw std::invalid_argument("student class count does not match the dataset");

  std::mt19937_64 shuffle_rng(mix_seed(seed, 0x5aff1e));
  std::vector<int> order(train_split.size());
  std::iota(order.begin(), order.end(), 0);

  Model::Gradients velocity;
  Model::Cache cache;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
      std::span<const int> idx(order.data() + start, end - start);
      Eigen::MatrixXd x = materialize_batch(train_split, idx);
      if (cfg.augment)
        augment_batch(x, train_split.channels, train_split.height, train_split.width,
                      shuffle_rng);
      std::vector<int> labels(idx.size());
      for (size_t i = 0; i < idx.size(); ++i)
        labels[i] = train_split.labels[static_cast<size_t>(idx[i])];

      Eigen::MatrixXd teacher_logits = teacher.forward(x);
      if (teacher_logit_rows) {
        Eigen::MatrixXd restricted(static_cast<Eigen::Index>(teacher_logit_rows->size()),
                                   teacher_logits.cols());
        for (size_t r = 0; r < teacher_logit_rows->size(); ++r)
          restricted.row(static_cast<Eigen::Index>(r)) =
              teacher_logits.row((*teacher_logit_rows)[r]);
        teacher_logits = std::move(restricted);
      }

      Eigen::MatrixXd logits = student.forward_train(x, cache);
      Eigen::MatrixXd dlogits;
      double loss;
      try {
        loss = kd_loss_with_grad(logits, teacher_logits, labels, cfg, dlogits);
      } catch (const std::invalid_argument&) {
        throw TrainingDivergedError();
      }
      if (!std::isfinite(loss)) throw TrainingDivergedError();
      epoch_loss += loss;
      ++batches;

      Model::Gradients grads = student.zero_gradients();
      student.backward(cache, dlogits, grads);
      student.apply_sgd(grads, velocity, cfg.learning_rate, cfg.momentum);
    }
    out.loss_curve.push_back(epoch_loss / std::max(1, batches));
  }
  return out;
}

std::vector<double> finetune_hard(Model& model, const Dataset& train_split, int epochs,
                                  double learning_rate, double momentum, int batch_size,
                                  std::uint64_t seed) {
  if (train_split.size() == 0) throw std::invalid_argument("empty training split");
  DistillConfig cfg;
  cfg.mode = DistillMode::hard_only;
  cfg.batch_size = batch_size;

  std::mt19937_64 shuffle_rng(mix_seed(seed, 0xf17e));
  std::vector<int> order(train_split.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<double> curve;
  Model::Gradients velocity;
  Model::Cache cache;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    double epoch_loss = 0.0;
    int batches = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(batch_size));
      std::span<const int> idx(order.data() + start, end - start);
      Eigen::MatrixXd x = materialize_batch(train_split, idx);
      std::vector<int> labels(idx.size());
      for (size_t i = 0; i < idx.size(); ++i)
        labels[i] = train_split.labels[static_cast<size_t>(idx[i])];

      Eigen::MatrixXd logits = model.forward_train(x, cache);
      Eigen::MatrixXd dlogits;
      const double loss = kd_loss_with_grad(logits, logits, labels, cfg, dlogits);
      if (!std::isfinite(loss)) throw TrainingDivergedError();
      epoch_loss += loss;
      ++batches;

      Model::Gradients grads = model.zero_gradients();
      model.backward(cache, dlogits, grads);
      model.apply_sgd(grads, velocity, learning_rate, momentum);
    }
    curve.push_back(epoch_loss / std::max(1, batches));
  }
  return curve;
}

double evaluate_accuracy(const Model& model, const Dataset& test_split) {
  if (test_split.size() == 0) throw std::invalid_argument("empty evaluation split");
  constexpr size_t kEvalBatch = 256;
  size_t correct = 0;
  std::vector<int> idx(kEvalBatch);
  for (size_t start = 0; start < test_split.size(); start += kEvalBatch) {
    const size_t end = std::min(test_split.size(), start + kEvalBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<int>(start));
    Eigen::MatrixXd logits = model.forward(materialize_batch(test_split, idx));
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Eigen::Index pred;
      logits.col(j).maxCoeff(&pred);
      if (static_cast<int>(pred) == test_split.labels[start + static_cast<size_t>(j)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test_split.size());
}

namespace {
// Latency timing needs the device to itself to mean anything.
std::mutex g_device_mutex;
}  // namespace

double timing_median(std::vector<double> samples) {
  if (samples.empty()) throw std::invalid_argument("no timing samples");
  const size_t n = samples.size();
  auto mid = samples.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  double median = *mid;
  if (n % 2 == 0) {
    auto lower = std::max_element(samples.begin(), mid);
    median = 0.5 * (median + *lower);
  }
  return median;
}

LatencyMeasurement measure_latency(const Model& model, int warmup, int samples) {
  if (warmup < 1) throw std::invalid_argument("warmup must be >= 1");
  if (samples < 5) throw std::invalid_argument("samples must be >= 5");

  std::lock_guard lock(g_device_mutex);
  Eigen::MatrixXd input = Eigen::MatrixXd::Zero(model.input_size(), 1);
  // deterministic dummy content; values are irrelevant to timing
  for (Eigen::Index i = 0; i < input.rows(); ++i)
    input(i, 0) = std::sin(static_cast<double>(i) * 0.01);

  for (int i = 0; i < warmup; ++i) {
    volatile double sink = model.forward(input).sum();
    (void)sink;
  }
  std::vector<double> times(static_cast<size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    volatile double sink = model.forward(input).sum();
    (void)sink;
    const auto t1 = std::chrono::steady_clock::now();
    times[static_cast<size_t>(i)] = std::chrono::duration<double>(t1 - t0).count();
  }

  LatencyMeasurement m;
  m.median_seconds = timing_median(std::move(times));
  m.samples = samples;
  m.warmup = warmup;
  m.batch_size = 1;
  m.device_label = "cpu";
  return m;
}

}  // namespace ddc
