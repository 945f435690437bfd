// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>

#include "ddc/arch.hpp"
#include "ddc/nn.hpp"
#include "ddc/prune.hpp"
#include "ddc/reinforce.hpp"
#include "ddc/run_config.hpp"

namespace ddc {

/// A registered teacher: architecture, trained weights and the measured
/// reference metrics every reward is computed against.
struct TeacherBundle {
  ArchitectureSpec spec;
  Model model;
  TeacherReference reference;
  SubsetSpec subset;  // data the teacher was trained on
};

/// Subset selected by the config: explicit class list > named builtin
/// subset > full dataset.
SubsetSpec subset_from_config(const CompressionRunConfig& cfg);

/// Trains the configured teacher with plain cross-entropy and measures its
/// reference accuracy / latency / parameter count.
TeacherBundle train_teacher(const CompressionRunConfig& cfg);

void save_teacher(const TeacherBundle& teacher, const std::filesystem::path& dir);
TeacherBundle load_teacher(const std::filesystem::path& dir);

struct CompressionArtifacts {
  std::optional<EvaluationRecord> best;
  PolicyCheckpoint checkpoint;
  std::vector<IterationLog> logs;
  std::filesystem::path run_dir;
};

/// Full compression run: loads the teacher and data named by the config,
/// executes the RL loop with the real train/evaluate pipeline, and persists
/// config.snapshot, iterations.jsonl, checkpoints/iter_<k> and best/* under
/// run.run_dir. With a warm start, policy parameters and baseline resume
/// from the checkpoint.
CompressionArtifacts run_compression(const CompressionRunConfig& cfg,
                                     const std::optional<PolicyCheckpoint>& warm_start = {});

/// Warm-started run on the target config's (subset) data with the transfer
/// iteration budget (run.transfer_iterations).
CompressionArtifacts transfer_policy(const PolicyCheckpoint& source,
                                     const CompressionRunConfig& target);

/// Rank -> prune -> fine-tune baseline; writes prune/rounds.jsonl and best/*.
std::vector<EvaluationRecord> prune_baseline_run(const CompressionRunConfig& cfg, int rounds,
                                                 int filters_per_round, int finetune_epochs);

/// Distills a fixed student architecture from the registered teacher and
/// records it like a one-student run.
EvaluationRecord kd_baseline_run(const CompressionRunConfig& cfg,
                                 const ArchitectureSpec& student);

}  // namespace ddc
