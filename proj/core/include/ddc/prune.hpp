// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "ddc/data.hpp"
#include "ddc/nn.hpp"
#include "ddc/reinforce.hpp"

namespace ddc {

/// Importance of one convolution filter; lower score = removed earlier.
struct FilterRank {
  int layer_index = 0;
  int filter_index = 0;
  double score = 0.0;
};

/// First-order Taylor ranking: per filter, the data-mean of the absolute
/// spatial mean of activation * dLoss/dActivation, L2-normalized per layer.
/// Returns the full ascending ordering over every convolution filter with
/// (layer, filter) tie-breaking.
std::vector<FilterRank> rank_filters(const Model& model, const Dataset& ranking_split,
                                     int max_images = 2048);

struct PruneReport {
  std::vector<FilterRank> removed;
  std::vector<FilterRank> skipped_layer_floor;      // would have emptied a layer
  std::vector<FilterRank> skipped_residual_locked;  // width pinned by a shortcut
};

struct PrunedModel {
  Model model;
  ArchitectureSpec spec;
  PruneReport report;
};

/// Removes the `count` lowest-scored filters (layer floor: one filter always
/// survives per layer), rebuilding downstream input channels consistently.
PrunedModel prune_filters(const Model& model, const std::vector<FilterRank>& ranks, int count);

struct PruneBaselineConfig {
  int iterations = 0;
  int filters_per_iteration = 512;
  int finetune_epochs = 10;
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 128;
  int latency_warmup = 10;
  int latency_samples = 50;
  std::uint64_t seed = 1;
};

/// The rank -> prune -> fine-tune baseline. The first record is the
/// unpruned teacher's own evaluation; one record follows per round, scored
/// against the same teacher reference as the policy search so the outputs
/// are directly comparable.
std::vector<EvaluationRecord> prune_baseline(const Model& teacher, const Dataset& train_split,
                                             const Dataset& test_split,
                                             const TeacherReference& ref, const Thresholds& th,
                                             const PruneBaselineConfig& cfg,
                                             std::vector<Model>* keep_models = nullptr);

}  // namespace ddc
