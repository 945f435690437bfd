// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "ddc/arch.hpp"

namespace ddc {

/// One gated recurrent (LSTM) cell. W stacks the input, forget, cell and
/// output gate blocks (4H rows) against [x; h_prev] (I+H columns).
struct LstmCell {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
};

/// Bidirectional recurrent policy. A forward cell consumes the layer
/// encoding left-to-right, a backward cell right-to-left; the action head
/// maps [h_fwd_t; h_bwd_t; x_t] to one keep-logit per action row.
struct PolicyParameters {
  int input_width = 0;
  int hidden_width = 0;
  LstmCell fwd;
  LstmCell bwd;
  Eigen::VectorXd head_w;  // 2*hidden_width + input_width
  double head_b = 0.0;
};

/// One sampled action sequence with the log-probabilities of the draws.
struct Trajectory {
  ActionVector actions;
  std::vector<double> step_log_probs;
};

struct PolicyGradients {
  LstmCell fwd;
  LstmCell bwd;
  Eigen::VectorXd head_w;
  double head_b = 0.0;
};

PolicyGradients zero_gradients(const PolicyParameters& params);

/// Uniform fan-in initialization; head bias defaults to +2 so the initial
/// keep-probability sits near 0.88 and early samples stay close to the
/// teacher instead of degenerate all-removed students.
PolicyParameters init_policy(int input_width, int hidden_width, std::uint64_t seed,
                             double head_bias = 2.0);

/// Keep-probability per action row. `action_rows` selects the rows at which
/// actions are emitted; empty means every row. The recurrences always run
/// over the full encoding.
std::vector<double> action_probabilities(const PolicyParameters& params,
                                         const Eigen::MatrixXd& encoding,
                                         const std::vector<int>& action_rows = {});

/// Independent Bernoulli draws per action row; reproducible for a given rng
/// state. No hidden global randomness.
std::vector<Trajectory> sample_trajectories(const PolicyParameters& params,
                                            const Eigen::MatrixXd& encoding,
                                            const std::vector<int>& action_rows, int count,
                                            std::mt19937_64& rng);

/// Sum over steps of log pi(a_t | h_fwd, h_bwd, x_t).
double trajectory_log_prob(const PolicyParameters& params, const Eigen::MatrixXd& encoding,
                           const std::vector<int>& action_rows, const ActionVector& actions);

/// Adds coeff * d(log prob)/d(theta) into `grads` and returns the log prob.
/// Full backpropagation through both recurrences.
double accumulate_log_prob_gradient(const PolicyParameters& params,
                                    const Eigen::MatrixXd& encoding,
                                    const std::vector<int>& action_rows,
                                    const ActionVector& actions, double coeff,
                                    PolicyGradients& grads);

/// Serialized policy state: parameter tensors keyed by name plus the EMA
/// baseline and iteration counter. The unit of policy transfer.
struct PolicyCheckpoint {
  PolicyParameters params;
  double baseline_value = 0.0;
  double baseline_decay = 0.9;
  bool baseline_initialized = false;
  int iteration = 0;
  int num_encoding_rows = 0;
  int num_actions = 0;
};

void save_checkpoint(const PolicyCheckpoint& ckpt, const std::filesystem::path& file);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace ddc
