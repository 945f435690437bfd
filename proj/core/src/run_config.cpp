// SPDX-License-Identifier: Apache-2.0
#include "ddc/run_config.hpp"

#include <charconv>
#include <concepts>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

namespace ddc {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Shortest round-trip decimal form; integral values keep a trailing ".0" so
// the snapshot parses back as a float.
std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, ptr);
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
    s += ".0";
  return s;
}

struct Value {
  std::string raw;
  int line = 0;
};

using Section = std::map<std::string, Value>;

std::map<std::string, Section> parse_sections(const std::string& text) {
  std::map<std::string, Section> sections;
  std::istringstream in(text);
  std::string line, current;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // strip comments outside quotes
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line = line.substr(0, i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty())
        throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (current.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError("line " + std::to_string(lineno) + ": empty key or value");
    if (!sections[current].emplace(key, Value{value, lineno}).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key " + key);
  }
  return sections;
}

class Reader {
 public:
  Reader(std::map<std::string, Section> sections) : sections_(std::move(sections)) {}

  bool has(const std::string& section, const std::string& key) const {
    auto s = sections_.find(section);
    return s != sections_.end() && s->second.count(key) > 0;
  }

  void get(const std::string& section, const std::string& key, std::string& out) {
    const Value* v = take(section, key);
    if (!v) return;
    std::string raw = v->raw;
    if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
      fail(*v, key, "a quoted string");
    out = raw.substr(1, raw.size() - 2);
  }

  void get(const std::string& section, const std::string& key, bool& out) {
    const Value* v = take(section, key);
    if (!v) return;
    if (v->raw == "true") out = true;
    else if (v->raw == "false") out = false;
    else fail(*v, key, "true or false");
  }

  template <typename Int>
    requires std::integral<Int>
  void get(const std::string& section, const std::string& key, Int& out) {
    const Value* v = take(section, key);
    if (!v) return;
    Int parsed{};
    auto [ptr, ec] = std::from_chars(v->raw.data(), v->raw.data() + v->raw.size(), parsed);
    if (ec != std::errc() || ptr != v->raw.data() + v->raw.size())
      fail(*v, key, "an integer");
    out = parsed;
  }

  void get(const std::string& section, const std::string& key, double& out) {
    const Value* v = take(section, key);
    if (!v) return;
    double parsed{};
    auto [ptr, ec] = std::from_chars(v->raw.data(), v->raw.data() + v->raw.size(), parsed);
    if (ec != std::errc() || ptr != v->raw.data() + v->raw.size()) fail(*v, key, "a number");
    out = parsed;
  }

  void get(const std::string& section, const std::string& key, std::vector<int>& out) {
    const Value* v = take(section, key);
    if (!v) return;
    std::string raw = v->raw;
    if (raw.size() < 2 || raw.front() != '[' || raw.back() != ']')
      fail(*v, key, "an integer list like [0, 1]");
    out.clear();
    std::string inner = trim(raw.substr(1, raw.size() - 2));
    if (inner.empty()) return;
    std::istringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      int parsed{};
      auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), parsed);
      if (ec != std::errc() || ptr != item.data() + item.size())
        fail(*v, key, "an integer list like [0, 1]");
      out.push_back(parsed);
    }
  }

  // Everything not consumed is unknown.
  void finish() const {
    for (const auto& [name, section] : sections_)
      for (const auto& [key, value] : section)
        throw ConfigError("line " + std::to_string(value.line) + ": unknown key " + name + "." +
                          key);
  }

 private:
  const Value* take(const std::string& section, const std::string& key) {
    auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    taken_.push_back(k->second);
    const Value* v = &taken_.back();
    s->second.erase(k);
    if (s->second.empty()) sections_.erase(s);
    return v;
  }

  [[noreturn]] void fail(const Value& v, const std::string& key, const std::string& expected) {
    throw ConfigError("line " + std::to_string(v.line) + ": " + key + " expects " + expected +
                      ", got '" + v.raw + "'");
  }

  std::map<std::string, Section> sections_;
  std::vector<Value> taken_;
};

}  // namespace

CompressionRunConfig parse_config(const std::string& text) {
  Reader r(parse_sections(text));
  CompressionRunConfig cfg;

  r.get("teacher", "family", cfg.teacher.family);
  r.get("teacher", "arch", cfg.teacher.arch_file);
  r.get("teacher", "dir", cfg.teacher.dir);
  r.get("teacher", "epochs", cfg.teacher.epochs);

  r.get("data", "dataset", cfg.data.dataset);
  r.get("data", "root", cfg.data.root);
  r.get("data", "subset", cfg.data.subset);
  r.get("data", "classes", cfg.data.classes);

  r.get("run", "iterations", cfg.run.iterations);
  r.get("run", "students_per_iteration", cfg.run.students_per_iteration);
  r.get("run", "student_epochs", cfg.run.student_epochs);
  r.get("run", "seed", cfg.run.seed);
  r.get("run", "run_dir", cfg.run.run_dir);
  r.get("run", "parallel_workers", cfg.run.parallel_workers);
  r.get("run", "transfer_iterations", cfg.run.transfer_iterations);

  r.get("reward", "a_th", cfg.thresholds.a_th);
  r.get("reward", "t_th", cfg.thresholds.t_th);
  r.get("reward", "c_th", cfg.thresholds.c_th);
  r.get("reward", "steepness", cfg.thresholds.steepness);

  std::string mode = to_string(cfg.distill.mode);
  r.get("distill", "lambda_soft", cfg.distill.lambda_soft);
  r.get("distill", "epochs", cfg.distill.epochs);
  r.get("distill", "learning_rate", cfg.distill.learning_rate);
  r.get("distill", "momentum", cfg.distill.momentum);
  r.get("distill", "mode", mode);
  r.get("distill", "batch_size", cfg.distill.batch_size);
  r.get("distill", "temperature", cfg.distill.temperature);
  r.get("distill", "augment", cfg.distill.augment);
  cfg.distill.mode = distill_mode_from_string(mode);

  r.get("policy", "hidden_width", cfg.policy.hidden_width);
  r.get("policy", "learning_rate", cfg.policy.learning_rate);
  r.get("policy", "momentum", cfg.policy.momentum);
  r.get("policy", "baseline_decay", cfg.policy.baseline_decay);
  r.get("policy", "baseline_update_before", cfg.policy.baseline_update_before);
  r.get("policy", "head_bias_init", cfg.policy.head_bias_init);

  r.get("latency", "warmup", cfg.latency.warmup);
  r.get("latency", "samples", cfg.latency.samples);

  r.finish();
  return cfg;
}

CompressionRunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_snapshot(const CompressionRunConfig& cfg) {
  std::ostringstream out;
  auto str = [](const std::string& s) { return '"' + s + '"'; };

  out << "[data]\n";
  out << "classes = [";
  for (size_t i = 0; i < cfg.data.classes.size(); ++i)
    out << (i ? ", " : "") << cfg.data.classes[i];
  out << "]\n";
  out << "dataset = " << str(cfg.data.dataset) << "\n";
  out << "root = " << str(cfg.data.root) << "\n";
  out << "subset = " << str(cfg.data.subset) << "\n";

  out << "\n[distill]\n";
  out << "augment = " << (cfg.distill.augment ? "true" : "false") << "\n";
  out << "batch_size = " << cfg.distill.batch_size << "\n";
  out << "epochs = " << cfg.distill.epochs << "\n";
  out << "lambda_soft = " << format_double(cfg.distill.lambda_soft) << "\n";
  out << "learning_rate = " << format_double(cfg.distill.learning_rate) << "\n";
  out << "mode = " << str(to_string(cfg.distill.mode)) << "\n";
  out << "momentum = " << format_double(cfg.distill.momentum) << "\n";
  out << "temperature = " << format_double(cfg.distill.temperature) << "\n";

  out << "\n[latency]\n";
  out << "samples = " << cfg.latency.samples << "\n";
  out << "warmup = " << cfg.latency.warmup << "\n";

  out << "\n[policy]\n";
  out << "baseline_decay = " << format_double(cfg.policy.baseline_decay) << "\n";
  out << "baseline_update_before = " << (cfg.policy.baseline_update_before ? "true" : "false")
      << "\n";
  out << "head_bias_init = " << format_double(cfg.policy.head_bias_init) << "\n";
  out << "hidden_width = " << cfg.policy.hidden_width << "\n";
  out << "learning_rate = " << format_double(cfg.policy.learning_rate) << "\n";
  out << "momentum = " << format_double(cfg.policy.momentum) << "\n";

  out << "\n[reward]\n";
  out << "a_th = " << format_double(cfg.thresholds.a_th) << "\n";
  out << "c_th = " << format_double(cfg.thresholds.c_th) << "\n";
  out << "steepness = " << format_double(cfg.thresholds.steepness) << "\n";
  out << "t_th = " << format_double(cfg.thresholds.t_th) << "\n";

  out << "\n[run]\n";
  out << "iterations = " << cfg.run.iterations << "\n";
  out << "parallel_workers = " << cfg.run.parallel_workers << "\n";
  out << "run_dir = " << str(cfg.run.run_dir) << "\n";
  out << "seed = " << cfg.run.seed << "\n";
  out << "student_epochs = " << cfg.run.student_epochs << "\n";
  out << "students_per_iteration = " << cfg.run.students_per_iteration << "\n";
  out << "transfer_iterations = " << cfg.run.transfer_iterations << "\n";

  out << "\n[teacher]\n";
  out << "arch = " << str(cfg.teacher.arch_file) << "\n";
  out << "dir = " << str(cfg.teacher.dir) << "\n";
  out << "epochs = " << cfg.teacher.epochs << "\n";
  out << "family = " << str(cfg.teacher.family) << "\n";

  return out.str();
}

std::vector<std::string> validate_config(const CompressionRunConfig& cfg) {
  std::vector<std::string> issues;
  auto require = [&issues](bool ok, const char* msg) {
    if (!ok) issues.emplace_back(msg);
  };
  require(cfg.run.iterations >= 0, "run.iterations must be >= 0");
  require(cfg.run.students_per_iteration >= 1, "run.students_per_iteration must be >= 1");
  require(cfg.run.student_epochs >= 0, "run.student_epochs must be >= 0");
  require(cfg.run.parallel_workers >= 1, "run.parallel_workers must be >= 1");
  require(cfg.run.transfer_iterations >= 0, "run.transfer_iterations must be >= 0");
  require(!cfg.run.run_dir.empty(), "run.run_dir must be set");
  require(cfg.thresholds.a_th > 0, "reward.a_th must be > 0");
  require(cfg.thresholds.t_th > 0, "reward.t_th must be > 0");
  require(cfg.thresholds.c_th > 0, "reward.c_th must be > 0");
  require(cfg.thresholds.steepness > 0, "reward.steepness must be > 0");
  require(cfg.distill.lambda_soft >= 0 && cfg.distill.lambda_soft <= 1,
          "distill.lambda_soft must lie in [0,1]");
  require(cfg.distill.epochs >= 0, "distill.epochs must be >= 0");
  require(cfg.distill.batch_size >= 1, "distill.batch_size must be >= 1");
  require(cfg.distill.temperature > 0, "distill.temperature must be > 0");
  require(cfg.policy.hidden_width >= 1, "policy.hidden_width must be >= 1");
  require(cfg.policy.baseline_decay > 0 && cfg.policy.baseline_decay < 1,
          "policy.baseline_decay must lie in (0,1)");
  require(cfg.latency.warmup >= 1, "latency.warmup must be >= 1");
  require(cfg.latency.samples >= 5, "latency.samples must be >= 5");
  require(cfg.teacher.family.empty() || cfg.teacher.arch_file.empty(),
          "teacher.family and teacher.arch are mutually exclusive");
  require(!(cfg.teacher.family.empty() && cfg.teacher.arch_file.empty()),
          "one of teacher.family or teacher.arch is required");
  require(cfg.data.dataset == "cifar10" || cfg.data.dataset == "cifar100",
          "data.dataset must be cifar10 or cifar100");
  return issues;
}

void apply_env_overrides(CompressionRunConfig& cfg) {
  if (const char* root = std::getenv("DDC_DATA_ROOT"); root && *root) cfg.data.root = root;
}

}  // namespace ddc
