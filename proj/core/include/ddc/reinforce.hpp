// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "ddc/arch.hpp"
#include "ddc/distill.hpp"
#include "ddc/nn.hpp"
#include "ddc/policy.hpp"
#include "ddc/reward.hpp"

namespace ddc {

/// Exponential moving average of per-iteration mean rewards; the REINFORCE
/// variance-reduction baseline.
struct BaselineState {
  double value = 0.0;
  double decay = 0.9;
  bool initialized = false;
};

/// First update adopts the mean; afterwards value <- decay*value + (1-decay)*mean.
BaselineState update_baseline(BaselineState state, const std::vector<double>& rewards);

/// Metrics of one trained student.
struct EvaluationRecord {
  ActionVector actions;
  double accuracy = 0.0;
  double latency = 0.0;       // seconds
  long long parameters = 0;
  double reward = 0.0;
  std::array<double, 3> reward_components{};  // accuracy, latency, size
  int train_epochs = 0;
  bool failed = false;
  std::vector<double> loss_curve;
  LatencyMeasurement latency_measurement;
};

struct IterationLog {
  int iteration = 0;
  std::vector<EvaluationRecord> records;
  double baseline_before = 0.0;
  double baseline_after = 0.0;
  double policy_loss = 0.0;
};

/// Surrogate whose gradient is the negated baselined REINFORCE estimator:
/// -(1/N) * sum_i (R_i - b) * sum_t log pi(a_{i,t}).
/// The terminal reward is applied identically at every timestep.
double policy_gradient_loss(const std::vector<Trajectory>& trajectories,
                            const std::vector<double>& rewards, const BaselineState& baseline);

/// Trains and measures one derived student. Implementations must be safe to
/// call concurrently when parallel evaluation is enabled.
struct StudentOutcome {
  bool failed = false;
  double accuracy = 0.0;
  double latency_seconds = 0.0;
  long long parameters = 0;
  std::vector<double> loss_curve;
  LatencyMeasurement latency_measurement;
  std::shared_ptr<const Model> model;  // trained weights; null for failures
};
using StudentEvaluator =
    std::function<StudentOutcome(const ArchitectureSpec& student, int epochs, std::uint64_t seed)>;

struct RlLoopConfig {
  int iterations = 100;
  int students_per_iteration = 5;
  int student_epochs = 20;
  std::uint64_t seed = 1;
  int hidden_width = 64;
  double policy_lr = 0.001;
  double policy_momentum = 0.9;
  double baseline_decay = 0.9;
  // When false (default), the loss uses the EMA of previous iterations only.
  bool baseline_update_before = false;
  double head_bias_init = 2.0;
  int parallel_workers = 1;
};

struct RunHooks {
  std::function<void(const IterationLog&)> on_iteration;
  std::function<void(int, const PolicyCheckpoint&)> on_checkpoint;
  std::function<void(const EvaluationRecord&, const StudentOutcome&)> on_best;
};

struct RunResult {
  std::optional<EvaluationRecord> best;
  PolicyCheckpoint checkpoint;
  std::vector<IterationLog> logs;
};

/// The outer compression loop: per iteration, sample trajectories from the
/// policy over the teacher encoding, derive/validate/train/evaluate each
/// student, score with the thresholded product reward, update the baseline
/// and then the policy. Individual student failures are penalized, never
/// fatal. A warm-start checkpoint replaces fresh initialization; it must
/// match the teacher's encoding-row and action counts.
RunResult run_rl_loop(const RlLoopConfig& cfg, const ArchitectureSpec& teacher,
                      const TeacherReference& ref, const Thresholds& thresholds,
                      const StudentEvaluator& evaluate,
                      const std::optional<PolicyCheckpoint>& warm_start = {},
                      const RunHooks& hooks = {});

}  // namespace ddc
