// SPDX-License-Identifier: Apache-2.0
//
// ddc: searches compressed student architectures for a trained teacher CNN
// with a recurrent keep/remove policy, scoring candidates by a thresholded
// product of accuracy, latency and size, and training them by distillation.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ddc/arch_io.hpp"
#include "ddc/builtins.hpp"
#include "ddc/records.hpp"
#include "ddc/report.hpp"
#include "ddc/run_config.hpp"
#include "ddc/runner.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CommonOpts {
  std::string config_file;
  bool dry_run = false;
};

ddc::CompressionRunConfig load_effective_config(const CommonOpts& common) {
  ddc::CompressionRunConfig cfg = ddc::load_config(common.config_file);
  ddc::apply_env_overrides(cfg);
  auto issues = ddc::validate_config(cfg);
  if (!issues.empty()) {
    for (const auto& issue : issues) std::cerr << "config error: " << issue << "\n";
    throw ddc::ConfigError(issues.front());
  }
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& common) {
  cmd->add_option("--config", common.config_file, "run configuration file")
      ->required()
      ->check(CLI::ExistingFile);
  cmd->add_flag("--dry-run", common.dry_run, "validate and plan without writing anything");
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ddc::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

void print_best(const ddc::CompressionArtifacts& artifacts) {
  if (artifacts.best) {
    const auto& b = *artifacts.best;
    std::cout << "best student: reward " << b.reward << ", accuracy " << b.accuracy
              << ", parameters " << b.parameters << ", latency " << b.latency << "s\n";
  } else {
    std::cout << "no students evaluated\n";
  }
  std::cout << "run directory: " << artifacts.run_dir.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"data-driven CNN compression"};
  app.require_subcommand(1);

  // train-teacher
  CommonOpts teacher_opts;
  std::string teacher_out;
  auto* cmd_teacher = app.add_subcommand("train-teacher", "train and register a teacher model");
  add_common(cmd_teacher, teacher_opts);
  cmd_teacher->add_option("--out", teacher_out, "teacher directory (default: teacher.dir)");

  // compress
  CommonOpts compress_opts;
  int compress_iterations = -1;
  long long compress_seed = -1;
  std::string compress_run_dir, compress_mode;
  int compress_workers = -1;
  auto* cmd_compress = app.add_subcommand("compress", "run the compression policy search");
  add_common(cmd_compress, compress_opts);
  cmd_compress->add_option("--iterations", compress_iterations, "override run.iterations");
  cmd_compress->add_option("--seed", compress_seed, "override run.seed");
  cmd_compress->add_option("--run-dir", compress_run_dir, "override run.run_dir");
  cmd_compress->add_option("--mode", compress_mode, "distillation mode")
      ->check(CLI::IsMember({"soft_and_hard", "hard_only"}));
  cmd_compress->add_option("--workers", compress_workers, "override run.parallel_workers");

  // transfer
  CommonOpts transfer_opts;
  std::string transfer_from, transfer_run_dir;
  int transfer_iterations = -1;
  long long transfer_seed = -1;
  auto* cmd_transfer =
      app.add_subcommand("transfer", "warm-start compression from a policy checkpoint");
  add_common(cmd_transfer, transfer_opts);
  cmd_transfer->add_option("--from", transfer_from, "source policy checkpoint")->required();
  cmd_transfer->add_option("--iterations", transfer_iterations,
                           "override run.transfer_iterations");
  cmd_transfer->add_option("--seed", transfer_seed, "override run.seed");
  cmd_transfer->add_option("--run-dir", transfer_run_dir, "override run.run_dir");

  // prune-baseline
  CommonOpts prune_opts;
  int prune_rounds = 0, prune_filters = 512, prune_finetune = 10;
  std::string prune_run_dir;
  auto* cmd_prune = app.add_subcommand("prune-baseline", "rank-based filter pruning baseline");
  add_common(cmd_prune, prune_opts);
  cmd_prune->add_option("--rounds", prune_rounds, "pruning rounds")->required();
  cmd_prune->add_option("--filters", prune_filters, "filters removed per round");
  cmd_prune->add_option("--finetune-epochs", prune_finetune, "fine-tuning epochs per round");
  cmd_prune->add_option("--run-dir", prune_run_dir, "override run.run_dir");

  // kd-baseline
  CommonOpts kd_opts;
  std::string kd_student, kd_run_dir;
  auto* cmd_kd =
      app.add_subcommand("kd-baseline", "distill a fixed student architecture from the teacher");
  add_common(cmd_kd, kd_opts);
  cmd_kd->add_option("--student", kd_student, "student architecture document")
      ->required()
      ->check(CLI::ExistingFile);
  cmd_kd->add_option("--run-dir", kd_run_dir, "override run.run_dir");

  // report
  std::vector<std::string> report_dirs;
  std::string report_csv;
  auto* cmd_report = app.add_subcommand("report", "tabulate run results");
  cmd_report->add_option("dirs", report_dirs, "run or teacher directories")->required();
  cmd_report->add_option("--csv", report_csv, "also write a CSV file");

  // validate-config
  std::string validate_file;
  auto* cmd_validate = app.add_subcommand("validate-config", "parse and check a configuration");
  cmd_validate->add_option("config", validate_file, "configuration file")
      ->required()
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (cmd_teacher->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = load_effective_config(teacher_opts);
      if (!teacher_out.empty()) cfg.teacher.dir = teacher_out;
      if (teacher_opts.dry_run) {
        std::cout << "dry run: would train teacher '"
                  << (cfg.teacher.family.empty() ? cfg.teacher.arch_file : cfg.teacher.family)
                  << "' for " << cfg.teacher.epochs << " epochs into " << cfg.teacher.dir << "\n";
        return kExitOk;
      }
      ddc::TeacherBundle teacher = ddc::train_teacher(cfg);
      ddc::save_teacher(teacher, cfg.teacher.dir);
      std::cout << "teacher registered at " << cfg.teacher.dir << "\n"
                << "accuracy " << teacher.reference.accuracy << ", latency "
                << teacher.reference.latency << "s, parameters " << teacher.reference.parameters
                << "\n";
      return kExitOk;
    });
  }

  if (cmd_compress->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = load_effective_config(compress_opts);
      if (compress_iterations >= 0) cfg.run.iterations = compress_iterations;
      if (compress_seed >= 0) cfg.run.seed = compress_seed;
      if (!compress_run_dir.empty()) cfg.run.run_dir = compress_run_dir;
      if (!compress_mode.empty()) cfg.distill.mode = ddc::distill_mode_from_string(compress_mode);
      if (compress_workers >= 1) cfg.run.parallel_workers = compress_workers;
      if (compress_opts.dry_run) {
        std::cout << "dry run: would execute " << cfg.run.iterations << " iterations x "
                  << cfg.run.students_per_iteration << " students x " << cfg.run.student_epochs
                  << " epochs into " << cfg.run.run_dir << "\n";
        return kExitOk;
      }
      ddc::CompressionArtifacts artifacts = ddc::run_compression(cfg);
      print_best(artifacts);
      return kExitOk;
    });
  }

  if (cmd_transfer->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = load_effective_config(transfer_opts);
      if (transfer_iterations >= 0) cfg.run.transfer_iterations = transfer_iterations;
      if (transfer_seed >= 0) cfg.run.seed = transfer_seed;
      if (!transfer_run_dir.empty()) cfg.run.run_dir = transfer_run_dir;
      if (!fs::exists(transfer_from))
        throw ddc::ConfigError("checkpoint not found: " + transfer_from);
      ddc::PolicyCheckpoint source = ddc::load_checkpoint(transfer_from);
      if (transfer_opts.dry_run) {
        std::cout << "dry run: would transfer from " << transfer_from << " for "
                  << cfg.run.transfer_iterations << " iterations into " << cfg.run.run_dir
                  << "\n";
        return kExitOk;
      }
      ddc::CompressionArtifacts artifacts = ddc::transfer_policy(source, cfg);
      print_best(artifacts);
      return kExitOk;
    });
  }

  if (cmd_prune->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = load_effective_config(prune_opts);
      if (!prune_run_dir.empty()) cfg.run.run_dir = prune_run_dir;
      if (prune_opts.dry_run) {
        std::cout << "dry run: would prune " << prune_filters << " filters x " << prune_rounds
                  << " rounds with " << prune_finetune << " fine-tune epochs into "
                  << cfg.run.run_dir << "\n";
        return kExitOk;
      }
      auto records = ddc::prune_baseline_run(cfg, prune_rounds, prune_filters, prune_finetune);
      for (const auto& rec : records)
        std::cout << "parameters " << rec.parameters << ", accuracy " << rec.accuracy
                  << ", reward " << rec.reward << "\n";
      return kExitOk;
    });
  }

  if (cmd_kd->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = load_effective_config(kd_opts);
      if (!kd_run_dir.empty()) cfg.run.run_dir = kd_run_dir;
      ddc::ArchitectureSpec student = ddc::load_architecture(kd_student);
      if (kd_opts.dry_run) {
        std::cout << "dry run: would distill " << kd_student << " for " << cfg.distill.epochs
                  << " epochs into " << cfg.run.run_dir << "\n";
        return kExitOk;
      }
      ddc::EvaluationRecord rec = ddc::kd_baseline_run(cfg, student);
      std::cout << "kd student: accuracy " << rec.accuracy << ", parameters " << rec.parameters
                << ", latency " << rec.latency << "s, reward " << rec.reward << "\n";
      return kExitOk;
    });
  }

  if (cmd_report->parsed()) {
    return guarded([&] {
      std::vector<fs::path> dirs(report_dirs.begin(), report_dirs.end());
      auto rows = ddc::collect_report_rows(dirs);
      std::cout << ddc::render_report_text(rows);
      if (!report_csv.empty()) {
        std::ofstream out(report_csv);
        if (!out) throw std::runtime_error("cannot write " + report_csv);
        out << ddc::render_report_csv(rows);
      }
      return kExitOk;
    });
  }

  if (cmd_validate->parsed()) {
    return guarded([&] {
      ddc::CompressionRunConfig cfg = ddc::load_config(validate_file);
      ddc::apply_env_overrides(cfg);
      auto issues = ddc::validate_config(cfg);
      if (!issues.empty()) {
        for (const auto& issue : issues) std::cerr << "config error: " << issue << "\n";
        return kExitUsage;
      }
      std::cout << ddc::config_snapshot(cfg);
      return kExitOk;
    });
  }

  return kExitUsage;
}
