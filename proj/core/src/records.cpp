// SPDX-License-Identifier: Apache-2.0
#include "ddc/records.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

namespace ddc {

using nlohmann::json;

namespace {

json record_to_json_obj(const EvaluationRecord& rec) {
  json j;
  j["actions"] = rec.actions.actions;
  j["accuracy"] = rec.accuracy;
  j["latency"] = rec.latency;
  j["parameters"] = rec.parameters;
  j["reward"] = rec.reward;
  j["reward_components"] = rec.reward_components;
  j["train_epochs"] = rec.train_epochs;
  j["failed"] = rec.failed;
  if (!rec.loss_curve.empty()) j["loss_curve"] = rec.loss_curve;
  if (rec.latency_measurement.samples > 0) {
    const auto& lm = rec.latency_measurement;
    j["latency_measurement"] = {{"median_seconds", lm.median_seconds},
                                {"samples", lm.samples},
                                {"warmup", lm.warmup},
                                {"batch_size", lm.batch_size},
                                {"device_label", lm.device_label}};
  }
  return j;
}

EvaluationRecord record_from_json_obj(const json& j) {
  EvaluationRecord rec;
  rec.actions.actions = j.at("actions").get<std::vector<std::uint8_t>>();
  rec.accuracy = j.at("accuracy").get<double>();
  rec.latency = j.at("latency").get<double>();
  rec.parameters = j.at("parameters").get<long long>();
  rec.reward = j.at("reward").get<double>();
  rec.reward_components = j.at("reward_components").get<std::array<double, 3>>();
  rec.train_epochs = j.at("train_epochs").get<int>();
  rec.failed = j.at("failed").get<bool>();
  if (j.contains("loss_curve")) rec.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  if (j.contains("latency_measurement")) {
    const auto& lm = j.at("latency_measurement");
    rec.latency_measurement.median_seconds = lm.at("median_seconds").get<double>();
    rec.latency_measurement.samples = lm.at("samples").get<int>();
    rec.latency_measurement.warmup = lm.at("warmup").get<int>();
    rec.latency_measurement.batch_size = lm.at("batch_size").get<int>();
    rec.latency_measurement.device_label = lm.at("device_label").get<std::string>();
  }
  return rec;
}

}  // namespace

std::string record_to_json(const EvaluationRecord& rec) { return record_to_json_obj(rec).dump(); }

EvaluationRecord record_from_json(const std::string& text) {
  return record_from_json_obj(json::parse(text));
}

std::string iteration_log_to_json(const IterationLog& log) {
  json j;
  j["iteration"] = log.iteration;
  j["baseline_before"] = log.baseline_before;
  j["baseline_after"] = log.baseline_after;
  j["policy_loss"] = log.policy_loss;
  j["records"] = json::array();
  for (const auto& rec : log.records) j["records"].push_back(record_to_json_obj(rec));
  return j.dump();
}

IterationLog iteration_log_from_json(const std::string& line) {
  json j = json::parse(line);
  IterationLog log;
  log.iteration = j.at("iteration").get<int>();
  log.baseline_before = j.at("baseline_before").get<double>();
  log.baseline_after = j.at("baseline_after").get<double>();
  log.policy_loss = j.at("policy_loss").get<double>();
  for (const auto& jr : j.at("records")) log.records.push_back(record_from_json_obj(jr));
  return log;
}

std::vector<IterationLog> read_iterations_jsonl(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot read " + file.string());
  std::vector<IterationLog> logs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    logs.push_back(iteration_log_from_json(line));
  }
  return logs;
}

}  // namespace ddc
