// SPDX-License-Identifier: Apache-2.0
#include "ddc/runner.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "ddc/arch_io.hpp"
#include "ddc/builtins.hpp"
#include "ddc/distill.hpp"
#include "ddc/records.hpp"
#include "ddc/rng.hpp"

namespace ddc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void ensure_valid(const CompressionRunConfig& cfg) {
  auto issues = validate_config(cfg);
  if (!issues.empty()) throw ConfigError("invalid configuration: " + issues.front());
}

double restricted_accuracy(const Model& teacher, const Dataset& test,
                           const std::vector<int>& rows) {
  if (test.size() == 0) throw std::invalid_argument("empty evaluation split");
  constexpr size_t kBatch = 256;
  size_t correct = 0;
  std::vector<int> idx;
  for (size_t start = 0; start < test.size(); start += kBatch) {
    const size_t end = std::min(test.size(), start + kBatch);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<int>(start));
    Eigen::MatrixXd logits = teacher.forward(materialize_batch(test, idx));
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      int best = 0;
      for (size_t r = 1; r < rows.size(); ++r)
        if (logits(rows[r], j) > logits(rows[static_cast<size_t>(best)], j))
          best = static_cast<int>(r);
      if (best == test.labels[start + static_cast<size_t>(j)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

// Positions of the target classes within the teacher's class list, or empty
// when teacher and target agree (no restriction needed).
std::vector<int> restriction_rows(const SubsetSpec& teacher_subset, const SubsetSpec& target) {
  if (teacher_subset.base_dataset != target.base_dataset)
    throw ConfigError("teacher was trained on " +
                      std::string(to_string(teacher_subset.base_dataset)) +
                      " but the run targets " + to_string(target.base_dataset));
  if (teacher_subset.classes == target.classes) return {};
  std::vector<int> rows;
  rows.reserve(target.classes.size());
  for (int cls : target.classes) {
    auto it = std::find(teacher_subset.classes.begin(), teacher_subset.classes.end(), cls);
    if (it == teacher_subset.classes.end())
      throw ConfigError("target class " + std::to_string(cls) +
                        " is not covered by the teacher's training classes");
    rows.push_back(static_cast<int>(it - teacher_subset.classes.begin()));
  }
  return rows;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << text;
}

void write_best(const fs::path& run_dir, const EvaluationRecord& rec, const Model& model,
                const std::string& method, const TeacherReference& ref) {
  fs::create_directories(run_dir / "best");
  save_architecture(model.spec(), run_dir / "best" / "arch.json");
  save_model_weights(model, run_dir / "best" / "model_weights");
  json j = json::parse(record_to_json(rec));
  j["method"] = method;
  j["teacher"] = {{"accuracy", ref.accuracy},
                  {"latency", ref.latency},
                  {"parameters", ref.parameters}};
  write_text(run_dir / "best" / "record.json", j.dump(2) + "\n");
}

}  // namespace

SubsetSpec subset_from_config(const CompressionRunConfig& cfg) {
  const BaseDataset base = base_dataset_from_string(cfg.data.dataset);
  if (!cfg.data.classes.empty())
    return SubsetSpec{base, "custom", cfg.data.classes};
  if (!cfg.data.subset.empty()) {
    auto all = builtin_subsets();
    auto it = all.find(cfg.data.subset);
    if (it == all.end()) throw ConfigError("unknown subset: " + cfg.data.subset);
    if (it->second.base_dataset != base)
      throw ConfigError("subset " + cfg.data.subset + " belongs to " +
                        to_string(it->second.base_dataset) + ", not " + cfg.data.dataset);
    return it->second;
  }
  return builtin_subsets().at(cfg.data.dataset);
}

TeacherBundle train_teacher(const CompressionRunConfig& cfg) {
  ensure_valid(cfg);
  const SubsetSpec subset = subset_from_config(cfg);
  const int classes = static_cast<int>(subset.classes.size());

  ArchitectureSpec spec = cfg.teacher.arch_file.empty()
                              ? builtin_architecture(cfg.teacher.family, classes)
                              : load_architecture(cfg.teacher.arch_file);
  if (spec.num_classes != classes)
    throw ConfigError("teacher architecture expects " + std::to_string(spec.num_classes) +
                      " classes but the dataset provides " + std::to_string(classes));

  Dataset train = load_split(subset, Split::train, cfg.data.root);
  Dataset test = load_split(subset, Split::test, cfg.data.root);

  TeacherBundle bundle{spec, Model::instantiate(spec, mix_seed(cfg.run.seed, 0x7eac)), {}, subset};
  finetune_hard(bundle.model, train, cfg.teacher.epochs, cfg.distill.learning_rate,
                cfg.distill.momentum, cfg.distill.batch_size, mix_seed(cfg.run.seed, 0x7eac1));

  bundle.reference.accuracy = evaluate_accuracy(bundle.model, test);
  bundle.reference.latency =
      measure_latency(bundle.model, cfg.latency.warmup, cfg.latency.samples).median_seconds;
  bundle.reference.parameters = bundle.model.parameter_count();
  return bundle;
}

void save_teacher(const TeacherBundle& teacher, const fs::path& dir) {
  fs::create_directories(dir);
  save_architecture(teacher.spec, dir / "arch.json");
  save_model_weights(teacher.model, dir / "model_weights");
  json j;
  j["accuracy"] = teacher.reference.accuracy;
  j["latency"] = teacher.reference.latency;
  j["parameters"] = teacher.reference.parameters;
  j["dataset"] = to_string(teacher.subset.base_dataset);
  j["subset"] = {{"name", teacher.subset.name}, {"classes", teacher.subset.classes}};
  write_text(dir / "reference.json", j.dump(2) + "\n");
}

TeacherBundle load_teacher(const fs::path& dir) {
  if (!fs::exists(dir / "reference.json"))
    throw std::runtime_error("no registered teacher at " + dir.string() +
                             " (run train-teacher first)");
  std::ifstream in(dir / "reference.json");
  json j = json::parse(in);
  TeacherBundle bundle;
  bundle.spec = load_architecture(dir / "arch.json");
  bundle.model = load_model_weights(bundle.spec, dir / "model_weights");
  bundle.reference.accuracy = j.at("accuracy").get<double>();
  bundle.reference.latency = j.at("latency").get<double>();
  bundle.reference.parameters = j.at("parameters").get<long long>();
  bundle.subset.base_dataset = base_dataset_from_string(j.at("dataset").get<std::string>());
  bundle.subset.name = j.at("subset").at("name").get<std::string>();
  bundle.subset.classes = j.at("subset").at("classes").get<std::vector<int>>();
  return bundle;
}

CompressionArtifacts run_compression(const CompressionRunConfig& cfg,
                                     const std::optional<PolicyCheckpoint>& warm_start) {
  ensure_valid(cfg);
  TeacherBundle teacher = load_teacher(cfg.teacher.dir);
  const SubsetSpec target = subset_from_config(cfg);
  const std::vector<int> rows = restriction_rows(teacher.subset, target);

  Dataset train = load_split(target, Split::train, cfg.data.root);
  Dataset test = load_split(target, Split::test, cfg.data.root);

  // On a subset run the reward normalizes against the restricted teacher's
  // accuracy on that subset; latency and size are properties of the model
  // itself and carry over unchanged.
  TeacherReference ref = teacher.reference;
  if (!rows.empty()) ref.accuracy = restricted_accuracy(teacher.model, test, rows);
  if (!(ref.accuracy > 0.0))
    throw ConfigError("teacher reference accuracy is zero on the target data");

  const fs::path run_dir = cfg.run.run_dir;
  fs::create_directories(run_dir / "checkpoints");
  write_text(run_dir / "config.snapshot", config_snapshot(cfg));
  std::ofstream iterations(run_dir / "iterations.jsonl", std::ios::trunc);
  if (!iterations) throw std::runtime_error("cannot write iterations.jsonl");

  const std::string method =
      cfg.distill.mode == DistillMode::hard_only
          ? "ddc_ht"
          : (warm_start ? "ddc_pt" : "ddc");

  // Students are derived teacher-shaped; on a subset run their classifier is
  // re-headed to the subset's class count before training.
  const int target_classes = static_cast<int>(target.classes.size());
  StudentEvaluator evaluator = [&cfg, &teacher, &train, &test, &rows, target_classes](
                                   const ArchitectureSpec& student, int epochs,
                                   std::uint64_t seed) {
    StudentOutcome out;
    DistillConfig dcfg = cfg.distill;
    dcfg.epochs = epochs;
    try {
      ArchitectureSpec adapted = student;
      if (adapted.num_classes != target_classes) {
        adapted.num_classes = target_classes;
        adapted.layers.back().out_channels = target_classes;
      }
      TrainedStudent trained = train_student(adapted, teacher.model, train, dcfg, seed,
                                             rows.empty() ? nullptr : &rows);
      out.accuracy = evaluate_accuracy(trained.model, test);
      LatencyMeasurement lm =
          measure_latency(trained.model, cfg.latency.warmup, cfg.latency.samples);
      out.latency_seconds = lm.median_seconds;
      out.latency_measurement = lm;
      out.parameters = trained.model.parameter_count();
      out.loss_curve = std::move(trained.loss_curve);
      out.model = std::make_shared<const Model>(std::move(trained.model));
    } catch (const TrainingDivergedError&) {
      out.failed = true;
    }
    return out;
  };

  RunHooks hooks;
  hooks.on_iteration = [&iterations](const IterationLog& log) {
    iterations << iteration_log_to_json(log) << "\n";
    iterations.flush();
  };
  hooks.on_checkpoint = [&run_dir](int iter, const PolicyCheckpoint& ckpt) {
    save_checkpoint(ckpt, run_dir / "checkpoints" / ("iter_" + std::to_string(iter)));
  };
  hooks.on_best = [&run_dir, &method, &ref](const EvaluationRecord& rec,
                                            const StudentOutcome& outcome) {
    if (outcome.model) write_best(run_dir, rec, *outcome.model, method, ref);
  };

  RlLoopConfig loop;
  loop.iterations = cfg.run.iterations;
  loop.students_per_iteration = cfg.run.students_per_iteration;
  loop.student_epochs = cfg.run.student_epochs;
  loop.seed = static_cast<std::uint64_t>(cfg.run.seed);
  loop.hidden_width = cfg.policy.hidden_width;
  loop.policy_lr = cfg.policy.learning_rate;
  loop.policy_momentum = cfg.policy.momentum;
  loop.baseline_decay = cfg.policy.baseline_decay;
  loop.baseline_update_before = cfg.policy.baseline_update_before;
  loop.head_bias_init = cfg.policy.head_bias_init;
  loop.parallel_workers = cfg.run.parallel_workers;

  RunResult result =
      run_rl_loop(loop, teacher.spec, ref, cfg.thresholds, evaluator, warm_start, hooks);

  save_checkpoint(result.checkpoint, run_dir / "checkpoints" / "final");
  return {std::move(result.best), std::move(result.checkpoint), std::move(result.logs), run_dir};
}

CompressionArtifacts transfer_policy(const PolicyCheckpoint& source,
                                     const CompressionRunConfig& target) {
  CompressionRunConfig cfg = target;
  cfg.run.iterations = cfg.run.transfer_iterations;
  return run_compression(cfg, source);
}

std::vector<EvaluationRecord> prune_baseline_run(const CompressionRunConfig& cfg, int rounds,
                                                 int filters_per_round, int finetune_epochs) {
  ensure_valid(cfg);
  if (rounds < 0 || filters_per_round < 1) throw ConfigError("invalid pruning parameters");
  TeacherBundle teacher = load_teacher(cfg.teacher.dir);
  const SubsetSpec target = subset_from_config(cfg);
  if (!restriction_rows(teacher.subset, target).empty())
    throw ConfigError("the pruning baseline fine-tunes the teacher itself; it requires the "
                      "teacher's own training data");

  Dataset train = load_split(target, Split::train, cfg.data.root);
  Dataset test = load_split(target, Split::test, cfg.data.root);

  PruneBaselineConfig pcfg;
  pcfg.iterations = rounds;
  pcfg.filters_per_iteration = filters_per_round;
  pcfg.finetune_epochs = finetune_epochs;
  pcfg.learning_rate = cfg.distill.learning_rate;
  pcfg.momentum = cfg.distill.momentum;
  pcfg.batch_size = cfg.distill.batch_size;
  pcfg.latency_warmup = cfg.latency.warmup;
  pcfg.latency_samples = cfg.latency.samples;
  pcfg.seed = static_cast<std::uint64_t>(cfg.run.seed);

  std::vector<Model> models;
  std::vector<EvaluationRecord> records = prune_baseline(
      teacher.model, train, test, teacher.reference, cfg.thresholds, pcfg, &models);

  const fs::path run_dir = cfg.run.run_dir;
  fs::create_directories(run_dir / "prune");
  write_text(run_dir / "config.snapshot", config_snapshot(cfg));
  std::ofstream rounds_out(run_dir / "prune" / "rounds.jsonl", std::ios::trunc);
  for (const auto& rec : records) rounds_out << record_to_json(rec) << "\n";

  size_t best = 0;
  for (size_t i = 1; i < records.size(); ++i)
    if (records[i].reward > records[best].reward) best = i;
  write_best(run_dir, records[best], models[best], "prun", teacher.reference);
  return records;
}

EvaluationRecord kd_baseline_run(const CompressionRunConfig& cfg,
                                 const ArchitectureSpec& student) {
  ensure_valid(cfg);
  TeacherBundle teacher = load_teacher(cfg.teacher.dir);
  const SubsetSpec target = subset_from_config(cfg);
  const std::vector<int> rows = restriction_rows(teacher.subset, target);

  Dataset train = load_split(target, Split::train, cfg.data.root);
  Dataset test = load_split(target, Split::test, cfg.data.root);

  TeacherReference ref = teacher.reference;
  if (!rows.empty()) ref.accuracy = restricted_accuracy(teacher.model, test, rows);

  TrainedStudent trained =
      train_student(student, teacher.model, train, cfg.distill,
                    static_cast<std::uint64_t>(cfg.run.seed), rows.empty() ? nullptr : &rows);

  EvaluationRecord rec;
  rec.accuracy = evaluate_accuracy(trained.model, test);
  LatencyMeasurement lm = measure_latency(trained.model, cfg.latency.warmup, cfg.latency.samples);
  rec.latency = lm.median_seconds;
  rec.latency_measurement = lm;
  rec.parameters = trained.model.parameter_count();
  rec.train_epochs = cfg.distill.epochs;
  rec.loss_curve = trained.loss_curve;
  RewardBreakdown r = combined_reward(rec.accuracy, rec.latency, rec.parameters, ref,
                                      cfg.thresholds);
  rec.reward = r.combined;
  rec.reward_components = {r.accuracy, r.latency, r.size};

  const fs::path run_dir = cfg.run.run_dir;
  fs::create_directories(run_dir);
  write_text(run_dir / "config.snapshot", config_snapshot(cfg));
  write_best(run_dir, rec, trained.model, "kd", ref);
  return rec;
}

}  // namespace ddc
