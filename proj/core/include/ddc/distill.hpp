// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddc/data.hpp"
#include "ddc/nn.hpp"

namespace ddc {

enum class DistillMode { soft_and_hard, hard_only };

const char* to_string(DistillMode mode);
DistillMode distill_mode_from_string(const std::string& s);

struct DistillConfig {
  double lambda_soft = 0.7;      // weight of the soft-target term
  int epochs = 20;
  double learning_rate = 0.001;
  double momentum = 0.9;
  DistillMode mode = DistillMode::soft_and_hard;
  int batch_size = 128;
  double temperature = 1.0;
  bool augment = false;          // random horizontal flip + pad-4 crop

  friend bool operator==(const DistillConfig&, const DistillConfig&) = default;
};

/// Student training blew up (non-finite loss); the caller records a failed
/// student instead of crashing the run.
class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError() : std::runtime_error("student training diverged (non-finite loss)") {}
};

/// lambda*KL(student softmax || teacher softmax) + (1-lambda)*CE(student, labels),
/// averaged over the batch. hard_only mode returns the cross-entropy term
/// regardless of lambda. Logits: classes x batch.
double kd_loss(const Eigen::MatrixXd& student_logits, const Eigen::MatrixXd& teacher_logits,
               const std::vector<int>& labels, const DistillConfig& cfg);

/// Same value plus dLoss/dStudentLogits.
double kd_loss_with_grad(const Eigen::MatrixXd& student_logits,
                         const Eigen::MatrixXd& teacher_logits, const std::vector<int>& labels,
                         const DistillConfig& cfg, Eigen::MatrixXd& dlogits);

struct TrainedStudent {
  Model model;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

/// Instantiates the student with seeded initialization and trains it with
/// SGD(momentum) on kd_loss, computing frozen-teacher logits per batch.
/// `teacher_logit_rows`, when non-null, selects teacher logit rows first
/// (a full-dataset teacher distilling into a subset student).
TrainedStudent train_student(const ArchitectureSpec& arch, const Model& teacher,
                             const Dataset& train_split, const DistillConfig& cfg,
                             std::uint64_t seed,
                             const std::vector<int>* teacher_logit_rows = nullptr);

/// Top-1 accuracy over the full split; deterministic.
double evaluate_accuracy(const Model& model, const Dataset& test_split);

/// Plain cross-entropy training of an existing model (no teacher); used to
/// recover accuracy after filter pruning. Returns per-epoch mean loss.
std::vector<double> finetune_hard(Model& model, const Dataset& train_split, int epochs,
                                  double learning_rate, double momentum, int batch_size,
                                  std::uint64_t seed);

struct LatencyMeasurement {
  double median_seconds = 0.0;
  int samples = 0;
  int warmup = 0;
  int batch_size = 1;
  std::string device_label;
};

/// Median of a timing sample set (average-of-middle-two for even counts).
double timing_median(std::vector<double> samples);

/// Median wall-clock time of single-image forward passes after discarded
/// warmup runs. Holds a process-wide device lock so concurrent student
/// evaluations cannot distort the timing.
LatencyMeasurement measure_latency(const Model& model, int warmup, int samples);

}  // namespace ddc
