// SPDX-License-Identifier: Apache-2.0
#include "ddc/prune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ddc/distill.hpp"
#include "ddc/rng.hpp"

namespace ddc {

namespace {

// Layers whose output width is pinned by a residual shortcut: the skip_end
// convolution itself and the feature producer feeding each block's input.
std::set<int> channel_locked_layers(const ArchitectureSpec& spec) {
  std::set<int> locked;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].skip_end) locked.insert(static_cast<int>(i));
    if (spec.layers[i].skip_start) {
      for (int j = static_cast<int>(i) - 1; j >= 0; --j) {
        const auto k = spec.layers[static_cast<size_t>(j)].kind;
        if (k == LayerKind::convolution || k == LayerKind::linear) {
          locked.insert(j);
          break;
        }
      }
    }
  }
  return locked;
}

}  // namespace

std::vector<FilterRank> rank_filters(const Model& model, const Dataset& ranking_split,
                                     int max_images) {
  if (ranking_split.size() == 0) throw std::invalid_argument("empty ranking split");
  const auto& spec = model.spec();

  // Per conv layer: running sum of |spatial mean of act*grad| per filter.
  std::vector<Eigen::VectorXd> sums(spec.layers.size());
  for (size_t i = 0; i < spec.layers.size(); ++i)
    if (spec.layers[i].kind == LayerKind::convolution)
      sums[i] = Eigen::VectorXd::Zero(spec.layers[i].out_channels);

  const size_t n = std::min(ranking_split.size(), static_cast<size_t>(max_images));
  size_t seen = 0;

  DistillConfig hard;
  hard.mode = DistillMode::hard_only;
  constexpr size_t kBatch = 128;
  Model::Cache cache;
  for (size_t start = 0; start < n; start += kBatch) {
    const size_t end = std::min(n, start + kBatch);
    std::vector<int> idx(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<int>(start));
    Eigen::MatrixXd x = materialize_batch(ranking_split, idx);
    std::vector<int> labels(idx.size());
    for (size_t i = 0; i < idx.size(); ++i)
      labels[i] = ranking_split.labels[static_cast<size_t>(idx[i])];

    Eigen::MatrixXd logits = model.forward_train(x, cache);
    Eigen::MatrixXd dlogits;
    kd_loss_with_grad(logits, logits, labels, hard, dlogits);

    Model::Gradients grads = model.zero_gradients();
    auto probe = [&](int layer, const Eigen::MatrixXd& act, const Eigen::MatrixXd& grad) {
      const auto& cv = std::get<Model::Conv>(model.layers()[static_cast<size_t>(layer)]);
      const int positions = cv.out_h * cv.out_w;
      Eigen::VectorXd& acc = sums[static_cast<size_t>(layer)];
      for (Eigen::Index img = 0; img < act.cols(); ++img)
        for (int f = 0; f < cv.out_c; ++f) {
          const double dot = act.col(img)
                                 .segment(static_cast<Eigen::Index>(f) * positions, positions)
                                 .dot(grad.col(img).segment(
                                     static_cast<Eigen::Index>(f) * positions, positions));
          acc(f) += std::abs(dot / static_cast<double>(positions));
        }
    };
    model.backward(cache, dlogits, grads, probe);
    seen += idx.size();
  }

  std::vector<FilterRank> ranks;
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::convolution) continue;
    Eigen::VectorXd scores = sums[i] / static_cast<double>(seen);
    const double norm = scores.norm();
    if (norm > 0.0) scores /= norm;  // per-layer L2 normalization
    for (int f = 0; f < scores.size(); ++f)
      ranks.push_back({static_cast<int>(i), f, scores(f)});
  }
  std::stable_sort(ranks.begin(), ranks.end(), [](const FilterRank& a, const FilterRank& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.layer_index != b.layer_index) return a.layer_index < b.layer_index;
    return a.filter_index < b.filter_index;
  });
  return ranks;
}

PrunedModel prune_filters(const Model& model, const std::vector<FilterRank>& ranks, int count) {
  const ArchitectureSpec& spec = model.spec();
  if (count < 0) throw std::invalid_argument("count must be >= 0");

  const std::set<int> locked = channel_locked_layers(spec);
  long long prunable = 0;
  std::vector<int> remaining(spec.layers.size(), 0);
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::convolution) continue;
    remaining[i] = spec.layers[i].out_channels;
    if (!locked.count(static_cast<int>(i)))
      prunable += spec.layers[i].out_channels - 1;  // layer floor of one filter
  }
  if (count > prunable)
    throw std::invalid_argument("count exceeds the number of prunable filters");

  PruneReport report;
  std::vector<std::set<int>> removed(spec.layers.size());
  for (const FilterRank& r : ranks) {
    if (static_cast<int>(report.removed.size()) == count) break;
    if (locked.count(r.layer_index)) {
      report.skipped_residual_locked.push_back(r);
      continue;
    }
    if (remaining[static_cast<size_t>(r.layer_index)] <= 1) {
      report.skipped_layer_floor.push_back(r);
      continue;
    }
    removed[static_cast<size_t>(r.layer_index)].insert(r.filter_index);
    --remaining[static_cast<size_t>(r.layer_index)];
    report.removed.push_back(r);
  }
  if (static_cast<int>(report.removed.size()) < count)
    throw std::invalid_argument("ranking does not cover enough prunable filters");

  // Build the narrowed spec.
  ArchitectureSpec pruned = spec;
  for (size_t i = 0; i < pruned.layers.size(); ++i)
    if (pruned.layers[i].kind == LayerKind::convolution)
      pruned.layers[i].out_channels = remaining[i];

  Model out = Model::instantiate(pruned, 0);

  // Copy surviving weights: rows follow kept filters, input-column blocks
  // follow the kept channels of the producing layer.
  std::vector<int> in_keep(spec.input_shape.channels);
  std::iota(in_keep.begin(), in_keep.end(), 0);
  for (size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::convolution) {
      std::vector<int> out_keep;
      for (int f = 0; f < l.out_channels; ++f)
        if (!removed[i].count(f)) out_keep.push_back(f);
      const auto& src = std::get<Model::Conv>(model.layers()[i]);
      auto& dst = std::get<Model::Conv>(out.layers()[i]);
      const int kk = src.k * src.k;
      for (size_t of = 0; of < out_keep.size(); ++of) {
        dst.b(static_cast<Eigen::Index>(of)) = src.b(out_keep[of]);
        for (size_t ic = 0; ic < in_keep.size(); ++ic)
          dst.W.block(static_cast<Eigen::Index>(of), static_cast<Eigen::Index>(ic) * kk, 1, kk) =
              src.W.block(out_keep[of], in_keep[ic] * kk, 1, kk);
      }
      in_keep = std::move(out_keep);
    } else if (l.kind == LayerKind::linear) {
      const auto& src = std::get<Model::Linear>(model.layers()[i]);
      auto& dst = std::get<Model::Linear>(out.layers()[i]);
      if (dst.in_w == src.in_w) {
        dst.W = src.W;
      } else {
        // after flatten: each kept channel keeps its contiguous H*W block
        const auto& src_spec_shapes = compute_shapes(spec);
        int plane = 1;
        for (size_t j = i; j-- > 0;) {
          if (spec.layers[j].kind == LayerKind::flatten) {
            plane = src_spec_shapes[j].in_channels > 0
                        ? src_spec_shapes[j].channels / src_spec_shapes[j].in_channels
                        : 1;
            break;
          }
        }
        for (size_t ic = 0; ic < in_keep.size(); ++ic)
          dst.W.middleCols(static_cast<Eigen::Index>(ic) * plane, plane) =
              src.W.middleCols(in_keep[ic] * plane, plane);
      }
      dst.b = src.b;
      in_keep.resize(static_cast<size_t>(l.out_channels));
      std::iota(in_keep.begin(), in_keep.end(), 0);
    }
  }

  return {std::move(out), std::move(pruned), std::move(report)};
}

std::vector<EvaluationRecord> prune_baseline(const Model& teacher, const Dataset& train_split,
                                             const Dataset& test_split,
                                             const TeacherReference& ref, const Thresholds& th,
                                             const PruneBaselineConfig& cfg,
                                             std::vector<Model>* keep_models) {
  auto evaluate = [&](const Model& m, int epochs) {
    EvaluationRecord rec;
    rec.accuracy = evaluate_accuracy(m, test_split);
    LatencyMeasurement lm = measure_latency(m, cfg.latency_warmup, cfg.latency_samples);
    rec.latency = lm.median_seconds;
    rec.latency_measurement = lm;
    rec.parameters = m.parameter_count();
    rec.train_epochs = epochs;
    RewardBreakdown r = combined_reward(rec.accuracy, rec.latency, rec.parameters, ref, th);
    rec.reward = r.combined;
    rec.reward_components = {r.accuracy, r.latency, r.size};
    return rec;
  };

  std::vector<EvaluationRecord> records;
  records.push_back(evaluate(teacher, 0));
  if (keep_models) keep_models->push_back(teacher);

  Model current = teacher;
  for (int round = 0; round < cfg.iterations; ++round) {
    std::vector<FilterRank> ranks = rank_filters(current, train_split);
    PrunedModel pruned = prune_filters(current, ranks, cfg.filters_per_iteration);
    current = std::move(pruned.model);
    auto curve = finetune_hard(current, train_split, cfg.finetune_epochs, cfg.learning_rate,
                               cfg.momentum, cfg.batch_size, mix_seed(cfg.seed, round));
    EvaluationRecord rec = evaluate(current, cfg.finetune_epochs);
    rec.loss_curve = std::move(curve);
    records.push_back(std::move(rec));
    if (keep_models) keep_models->push_back(current);
  }
  return records;
}

}  // namespace ddc
