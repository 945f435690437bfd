// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ddc/distill.hpp"
#include "ddc/reward.hpp"

namespace ddc {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TeacherConfig {
  std::string family;     // builtin name; empty when arch_file is set
  std::string arch_file;  // explicit architecture document
  std::string dir = "runs/teacher";
  int epochs = 30;
};

struct DataConfig {
  std::string dataset = "cifar10";
  std::string root = "data";
  std::string subset;        // builtin subset name; empty = full dataset
  std::vector<int> classes;  // explicit class list; overrides subset
};

struct PolicySection {
  int hidden_width = 64;
  double learning_rate = 0.001;
  double momentum = 0.9;
  double baseline_decay = 0.9;
  bool baseline_update_before = false;
  double head_bias_init = 2.0;
};

struct LatencySection {
  int warmup = 10;
  int samples = 50;
};

struct RunSection {
  int iterations = 100;
  int students_per_iteration = 5;
  int student_epochs = 20;
  long long seed = 1;
  std::string run_dir = "runs/compress";
  int parallel_workers = 1;
  int transfer_iterations = 20;
};

/// Everything a compression run needs, loadable from a sectioned key-value
/// file. CLI flags override file values; DDC_DATA_ROOT overrides data.root.
struct CompressionRunConfig {
  TeacherConfig teacher;
  DataConfig data;
  RunSection run;
  Thresholds thresholds;
  DistillConfig distill;
  PolicySection policy;
  LatencySection latency;
};

/// Parses the sectioned `key = value` format ('#' comments, quoted strings,
/// [n, ...] integer lists). Unknown sections or keys are errors.
CompressionRunConfig parse_config(const std::string& text);
CompressionRunConfig load_config(const std::filesystem::path& file);

/// Canonical serialization with all defaults materialized. Reloading a
/// snapshot and serializing again reproduces it byte-for-byte.
std::string config_snapshot(const CompressionRunConfig& cfg);

/// Semantic checks beyond parsing (counts >= 0, threshold positivity, ...).
std::vector<std::string> validate_config(const CompressionRunConfig& cfg);

/// Applies DDC_DATA_ROOT if set.
void apply_env_overrides(CompressionRunConfig& cfg);

}  // namespace ddc
