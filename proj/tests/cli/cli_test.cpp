// SPDX-License-Identifier: Apache-2.0
// Drives the installed `ddc` binary end to end against a synthetic dataset.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ddc/arch_io.hpp"
#include "ddc/builtins.hpp"
#include "ddc/records.hpp"
#include "ddc/run_config.hpp"
#include "support/synthetic_cifar.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args) {
  const char* cli = std::getenv("DDC_CLI");
  REQUIRE_MESSAGE(cli != nullptr, "DDC_CLI must point at the ddc binary");
  const fs::path out_file = fs::temp_directory_path() / "ddc_cli_out.txt";
  const std::string cmd = std::string(cli) + " " + args + " > " + out_file.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = WEXITSTATUS(raw);
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  res.output = ss.str();
  return res;
}

struct CliFixture {
  fs::path base;
  fs::path config_file;

  CliFixture() {
    base = fs::temp_directory_path() / "ddc_cli_fixture";
    if (!fs::exists(base / "data" / "cifar-10-batches-bin" / "data_batch_1.bin"))
      ddc::testsupport::write_synthetic_cifar10(base / "data", 40, 15, 4242);
    // only the dataset survives between runs
    for (const auto& entry : fs::directory_iterator(base))
      if (entry.path().filename() != "data") fs::remove_all(entry.path());
    config_file = base / "desk.toml";
    std::ofstream cfg(config_file);
    cfg << "[teacher]\n"
        << "family = \"desk\"\n"
        << "dir = \"" << (base / "teacher").string() << "\"\n"
        << "epochs = 3\n\n"
        << "[data]\n"
        << "dataset = \"cifar10\"\n"
        << "root = \"" << (base / "data").string() << "\"\n"
        << "classes = [0, 1]\n\n"
        << "[run]\n"
        << "iterations = 2\n"
        << "students_per_iteration = 2\n"
        << "student_epochs = 1\n"
        << "seed = 3\n"
        << "run_dir = \"" << (base / "run").string() << "\"\n"
        << "transfer_iterations = 1\n\n"
        << "[reward]\n"
        << "t_th = 0.7\n"
        << "c_th = 0.7\n\n"
        << "[distill]\n"
        << "batch_size = 16\n\n"
        << "[latency]\n"
        << "warmup = 1\n"
        << "samples = 5\n";
  }
};

}  // namespace

TEST_CASE("cli end-to-end workflow") {
  CliFixture fx;

  // validate-config prints the canonical snapshot
  auto validated = run_cli("validate-config " + fx.config_file.string());
  CHECK(validated.exit_code == 0);
  CHECK(validated.output.find("[run]") != std::string::npos);

  // dry runs write nothing
  auto dry = run_cli("train-teacher --config " + fx.config_file.string() + " --dry-run");
  CHECK(dry.exit_code == 0);
  CHECK_FALSE(fs::exists(fx.base / "teacher" / "reference.json"));
  auto dry2 = run_cli("compress --config " + fx.config_file.string() + " --dry-run");
  CHECK(dry2.exit_code == 0);
  CHECK_FALSE(fs::exists(fx.base / "run"));

  // teacher training registers the reference
  auto teacher = run_cli("train-teacher --config " + fx.config_file.string());
  INFO(teacher.output);
  CHECK(teacher.exit_code == 0);
  CHECK(fs::exists(fx.base / "teacher" / "arch.json"));
  CHECK(fs::exists(fx.base / "teacher" / "model_weights"));
  CHECK(fs::exists(fx.base / "teacher" / "reference.json"));

  // compression produces the documented run layout
  auto compress = run_cli("compress --config " + fx.config_file.string());
  INFO(compress.output);
  CHECK(compress.exit_code == 0);
  CHECK(fs::exists(fx.base / "run" / "config.snapshot"));
  CHECK(fs::exists(fx.base / "run" / "iterations.jsonl"));
  CHECK(fs::exists(fx.base / "run" / "checkpoints" / "iter_0"));
  CHECK(fs::exists(fx.base / "run" / "checkpoints" / "iter_1"));
  CHECK(fs::exists(fx.base / "run" / "best" / "arch.json"));
  CHECK(fs::exists(fx.base / "run" / "best" / "model_weights"));
  CHECK(fs::exists(fx.base / "run" / "best" / "record.json"));
  CHECK(ddc::read_iterations_jsonl(fx.base / "run" / "iterations.jsonl").size() == 2);

  // the snapshot reloads byte-for-byte
  {
    std::ifstream snap_in(fx.base / "run" / "config.snapshot");
    std::stringstream snap;
    snap << snap_in.rdbuf();
    ddc::CompressionRunConfig cfg = ddc::parse_config(snap.str());
    CHECK(ddc::config_snapshot(cfg) == snap.str());
  }

  // zero-iteration run is valid and empty
  auto empty = run_cli("compress --config " + fx.config_file.string() + " --iterations 0" +
                       " --run-dir " + (fx.base / "run0").string());
  CHECK(empty.exit_code == 0);
  CHECK(ddc::read_iterations_jsonl(fx.base / "run0" / "iterations.jsonl").empty());

  // hard-only ablation flag
  auto ht = run_cli("compress --config " + fx.config_file.string() + " --iterations 1" +
                    " --mode hard_only --run-dir " + (fx.base / "run_ht").string());
  CHECK(ht.exit_code == 0);
  {
    std::ifstream rec_in(fx.base / "run_ht" / "best" / "record.json");
    std::stringstream rec;
    rec << rec_in.rdbuf();
    CHECK(rec.str().find("\"method\": \"ddc_ht\"") != std::string::npos);
  }

  // transfer: missing checkpoint flag is a usage error
  auto usage = run_cli("transfer --config " + fx.config_file.string());
  CHECK(usage.exit_code == 2);

  // transfer with the final checkpoint of the scratch run
  auto transfer = run_cli("transfer --config " + fx.config_file.string() + " --from " +
                          (fx.base / "run" / "checkpoints" / "final").string() + " --run-dir " +
                          (fx.base / "run_pt").string());
  INFO(transfer.output);
  CHECK(transfer.exit_code == 0);
  CHECK(ddc::read_iterations_jsonl(fx.base / "run_pt" / "iterations.jsonl").size() == 1);

  // prune baseline
  auto prune = run_cli("prune-baseline --config " + fx.config_file.string() +
                       " --rounds 1 --filters 4 --finetune-epochs 1 --run-dir " +
                       (fx.base / "run_prune").string());
  INFO(prune.output);
  CHECK(prune.exit_code == 0);
  CHECK(fs::exists(fx.base / "run_prune" / "prune" / "rounds.jsonl"));
  CHECK(fs::exists(fx.base / "run_prune" / "best" / "record.json"));

  // kd baseline on the bundled 7-layer student
  const fs::path student_file = fx.base / "kd_student.json";
  ddc::save_architecture(ddc::kd_student_vgg7(2), student_file);
  auto kd = run_cli("kd-baseline --config " + fx.config_file.string() + " --student " +
                    student_file.string() + " --run-dir " + (fx.base / "run_kd").string());
  INFO(kd.output);
  CHECK(kd.exit_code == 0);
  CHECK(fs::exists(fx.base / "run_kd" / "best" / "record.json"));

  // report over teacher + runs, with CSV
  const fs::path csv = fx.base / "report.csv";
  auto report = run_cli("report " + (fx.base / "teacher").string() + " " +
                        (fx.base / "run").string() + " " + (fx.base / "run_prune").string() +
                        " " + (fx.base / "run_kd").string() + " --csv " + csv.string());
  INFO(report.output);
  CHECK(report.exit_code == 0);
  CHECK(report.output.find("teacher") != std::string::npos);
  CHECK(report.output.find("ddc") != std::string::npos);
  CHECK(report.output.find("prun") != std::string::npos);
  CHECK(report.output.find("kd") != std::string::npos);
  CHECK(fs::exists(csv));

  fs::remove_all(fx.base / "run0");
  fs::remove_all(fx.base / "run_ht");
}

TEST_CASE("cli error codes") {
  CliFixture fx;

  // unknown flag -> usage error
  CHECK(run_cli("compress --config " + fx.config_file.string() + " --bogus").exit_code == 2);

  // missing config file -> usage error
  CHECK(run_cli("compress --config /nonexistent.toml").exit_code == 2);

  // config with invalid values -> usage error
  const fs::path bad = fx.base / "bad.toml";
  {
    std::ofstream out(bad);
    out << "[teacher]\nfamily = \"desk\"\n[run]\nstudents_per_iteration = 0\n";
  }
  CHECK(run_cli("validate-config " + bad.string()).exit_code == 2);
  CHECK(run_cli("compress --config " + bad.string()).exit_code == 2);

  // runtime failure: compressing without a registered teacher
  const fs::path orphan = fx.base / "orphan.toml";
  {
    std::ofstream out(orphan);
    out << "[teacher]\nfamily = \"desk\"\ndir = \"" << (fx.base / "no_teacher").string()
        << "\"\n[data]\nroot = \"" << (fx.base / "data").string()
        << "\"\nclasses = [0, 1]\n[run]\nrun_dir = \"" << (fx.base / "run_orphan").string()
        << "\"\n";
  }
  CHECK(run_cli("compress --config " + orphan.string()).exit_code == 1);
}
