// SPDX-License-Identifier: Apache-2.0
#include "ddc/reinforce.hpp"

#include <cmath>
#include <future>
#include <numeric>
#include <stdexcept>

#include "ddc/rng.hpp"

namespace ddc {

BaselineState update_baseline(BaselineState state, const std::vector<double>& rewards) {
  if (rewards.empty()) throw std::invalid_argument("baseline update needs at least one reward");
  double sum = 0.0;
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::invalid_argument("non-finite reward");
    sum += r;
  }
  const double mean = sum / static_cast<double>(rewards.size());
  if (!state.initialized) {
    state.value = mean;
    state.initialized = true;
  } else {
    state.value = state.decay * state.value + (1.0 - state.decay) * mean;
  }
  return state;
}

double policy_gradient_loss(const std::vector<Trajectory>& trajectories,
                            const std::vector<double>& rewards, const BaselineState& baseline) {
  if (trajectories.empty() || trajectories.size() != rewards.size())
    throw std::invalid_argument("trajectory and reward counts must match and be >= 1");
  const double b = baseline.initialized ? baseline.value : 0.0;
  double loss = 0.0;
  for (size_t i = 0; i < trajectories.size(); ++i) {
    if (!std::isfinite(rewards[i])) throw std::invalid_argument("non-finite reward");
    const double log_prob = std::accumulate(trajectories[i].step_log_probs.begin(),
                                            trajectories[i].step_log_probs.end(), 0.0);
    loss -= (rewards[i] - b) * log_prob;
  }
  return loss / static_cast<double>(trajectories.size());
}

namespace {

struct PolicySgd {
  PolicyGradients velocity;
  bool fresh = true;

  void step(PolicyParameters& p, const PolicyGradients& g, double lr, double momentum) {
    if (fresh) {
      velocity = zero_gradients(p);
      fresh = false;
    }
    velocity.fwd.W = momentum * velocity.fwd.W + g.fwd.W;
    velocity.fwd.b = momentum * velocity.fwd.b + g.fwd.b;
    velocity.bwd.W = momentum * velocity.bwd.W + g.bwd.W;
    velocity.bwd.b = momentum * velocity.bwd.b + g.bwd.b;
    velocity.head_w = momentum * velocity.head_w + g.head_w;
    velocity.head_b = momentum * velocity.head_b + g.head_b;
    p.fwd.W -= lr * velocity.fwd.W;
    p.fwd.b -= lr * velocity.fwd.b;
    p.bwd.W -= lr * velocity.bwd.W;
    p.bwd.b -= lr * velocity.bwd.b;
    p.head_w -= lr * velocity.head_w;
    p.head_b -= lr * velocity.head_b;
  }
};

EvaluationRecord make_failed_record(const ActionVector& actions, int epochs,
                                    const TeacherReference& ref, const Thresholds& th) {
  EvaluationRecord rec;
  rec.actions = actions;
  rec.failed = true;
  rec.train_epochs = epochs;
  rec.accuracy = 0.0;
  rec.latency = ref.latency;
  rec.parameters = ref.parameters;
  RewardBreakdown r = penalty_reward(ref, th);
  rec.reward = r.combined;
  rec.reward_components = {r.accuracy, r.latency, r.size};
  return rec;
}

}  // namespace

RunResult run_rl_loop(const RlLoopConfig& cfg, const ArchitectureSpec& teacher,
                      const TeacherReference& ref, const Thresholds& thresholds,
                      const StudentEvaluator& evaluate,
                      const std::optional<PolicyCheckpoint>& warm_start, const RunHooks& hooks) {
  if (cfg.iterations < 0 || cfg.students_per_iteration < 1 || cfg.student_epochs < 0)
    throw std::invalid_argument("invalid RL loop configuration");

  const PolicyEncoding enc = encode_policy_context(teacher);
  const int n_actions = static_cast<int>(enc.action_rows.size());
  if (n_actions == 0) throw std::invalid_argument("teacher has no removable layers");

  PolicyParameters params;
  BaselineState baseline{0.0, cfg.baseline_decay, false};
  if (warm_start) {
    if (warm_start->params.input_width != kEncodingWidth)
      throw std::invalid_argument("checkpoint input width does not match encoder");
    if (warm_start->num_encoding_rows != static_cast<int>(enc.rows.rows()) ||
        warm_start->num_actions != n_actions)
      throw std::invalid_argument(
          "checkpoint layer counts do not match the target teacher architecture");
    params = warm_start->params;
    baseline = {warm_start->baseline_value, warm_start->baseline_decay,
                warm_start->baseline_initialized};
  } else {
    params = init_policy(kEncodingWidth, cfg.hidden_width, mix_seed(cfg.seed, 0x9011CE),
                         cfg.head_bias_init);
  }

  RunResult result;
  PolicySgd optimizer;
  std::optional<StudentOutcome> best_outcome;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    std::mt19937_64 sample_rng(mix_seed(cfg.seed, 2 * static_cast<std::uint64_t>(iter) + 1));
    std::vector<Trajectory> trajectories = sample_trajectories(
        params, enc.rows, enc.action_rows, cfg.students_per_iteration, sample_rng);

    // Train/evaluate the sampled students; derivation or training failures
    // become penalty records and never abort the run.
    auto evaluate_one = [&](const Trajectory& traj, std::uint64_t seed)
        -> std::pair<EvaluationRecord, StudentOutcome> {
      EvaluationRecord rec;
      rec.actions = traj.actions;
      rec.train_epochs = cfg.student_epochs;
      StudentOutcome outcome;
      try {
        ArchitectureSpec student = derive_student(teacher, traj.actions);
        ValidationReport rep = validate(student);
        if (!rep.ok) throw std::runtime_error("derived student failed validation");
        outcome = evaluate(student, cfg.student_epochs, seed);
      } catch (const AllLayersRemovedError&) {
        outcome.failed = true;
      } catch (const std::runtime_error&) {
        outcome.failed = true;
      }
      if (outcome.failed)
        return {make_failed_record(traj.actions, cfg.student_epochs, ref, thresholds), outcome};
      rec.accuracy = outcome.accuracy;
      rec.latency = outcome.latency_seconds;
      rec.parameters = outcome.parameters;
      rec.loss_curve = outcome.loss_curve;
      rec.latency_measurement = outcome.latency_measurement;
      RewardBreakdown r =
          combined_reward(rec.accuracy, rec.latency, rec.parameters, ref, thresholds);
      rec.reward = r.combined;
      rec.reward_components = {r.accuracy, r.latency, r.size};
      return {rec, outcome};
    };

    std::vector<std::pair<EvaluationRecord, StudentOutcome>> evaluated(trajectories.size());
    if (cfg.parallel_workers > 1) {
      std::vector<std::future<std::pair<EvaluationRecord, StudentOutcome>>> futures;
      futures.reserve(trajectories.size());
      for (size_t i = 0; i < trajectories.size(); ++i) {
        const std::uint64_t seed =
            mix_seed(cfg.seed, 0x57D * (static_cast<std::uint64_t>(iter) *
                                            cfg.students_per_iteration +
                                        i + 1));
        futures.push_back(std::async(std::launch::async, evaluate_one, trajectories[i], seed));
      }
      for (size_t i = 0; i < futures.size(); ++i) evaluated[i] = futures[i].get();
    } else {
      for (size_t i = 0; i < trajectories.size(); ++i) {
        const std::uint64_t seed =
            mix_seed(cfg.seed, 0x57D * (static_cast<std::uint64_t>(iter) *
                                            cfg.students_per_iteration +
                                        i + 1));
        evaluated[i] = evaluate_one(trajectories[i], seed);
      }
    }

    std::vector<double> rewards(evaluated.size());
    for (size_t i = 0; i < evaluated.size(); ++i) rewards[i] = evaluated[i].first.reward;

    IterationLog log;
    log.iteration = iter;
    log.baseline_before = baseline.value;
    BaselineState loss_baseline = baseline;
    if (cfg.baseline_update_before) {
      baseline = update_baseline(baseline, rewards);
      loss_baseline = baseline;
    }
    log.policy_loss = policy_gradient_loss(trajectories, rewards, loss_baseline);
    if (!cfg.baseline_update_before) baseline = update_baseline(baseline, rewards);
    log.baseline_after = baseline.value;

    // Policy update: accumulate -(R_i - b)/N * grad log pi per trajectory.
    const double b = loss_baseline.initialized ? loss_baseline.value : 0.0;
    PolicyGradients grads = zero_gradients(params);
    const double inv_n = 1.0 / static_cast<double>(trajectories.size());
    for (size_t i = 0; i < trajectories.size(); ++i)
      accumulate_log_prob_gradient(params, enc.rows, enc.action_rows, trajectories[i].actions,
                                   -(rewards[i] - b) * inv_n, grads);
    optimizer.step(params, grads, cfg.policy_lr, cfg.policy_momentum);

    for (auto& [rec, outcome] : evaluated) {
      if (!result.best || rec.reward > result.best->reward) {
        result.best = rec;
        best_outcome = outcome;
        if (hooks.on_best) hooks.on_best(rec, outcome);
      }
      log.records.push_back(std::move(rec));
    }

    PolicyCheckpoint ckpt;
    ckpt.params = params;
    ckpt.baseline_value = baseline.value;
    ckpt.baseline_decay = baseline.decay;
    ckpt.baseline_initialized = baseline.initialized;
    ckpt.iteration = iter + 1;
    ckpt.num_encoding_rows = static_cast<int>(enc.rows.rows());
    ckpt.num_actions = n_actions;
    if (hooks.on_checkpoint) hooks.on_checkpoint(iter, ckpt);
    if (hooks.on_iteration) hooks.on_iteration(log);
    result.logs.push_back(std::move(log));
    result.checkpoint = std::move(ckpt);
  }

  if (cfg.iterations == 0) {
    // Empty run: pass through the warm start or report a fresh checkpoint.
    result.checkpoint.params = params;
    result.checkpoint.baseline_value = baseline.value;
    result.checkpoint.baseline_decay = baseline.decay;
    result.checkpoint.baseline_initialized = baseline.initialized;
    result.checkpoint.iteration = warm_start ? warm_start->iteration : 0;
    result.checkpoint.num_encoding_rows = static_cast<int>(enc.rows.rows());
    result.checkpoint.num_actions = n_actions;
  }

  return result;
}

}  // namespace ddc
