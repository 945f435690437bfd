// SPDX-License-Identifier: Apache-2.0
#include "ddc/reward.hpp"

#include <cmath>
#include <stdexcept>

namespace ddc {

namespace {

// Overflow-safe logistic.
double logistic(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

void check_inputs(double value, const char* what, const Thresholds& th) {
  if (!std::isfinite(value)) throw std::invalid_argument(std::string(what) + " must be finite");
  if (value < 0.0) throw std::invalid_argument(std::string(what) + " must be >= 0");
  if (!(th.a_th > 0.0 && th.t_th > 0.0 && th.c_th > 0.0 && th.steepness > 0.0))
    throw std::invalid_argument("thresholds and steepness must be > 0");
}

}  // namespace

double accuracy_reward(double accuracy, const TeacherReference& ref, const Thresholds& th) {
  check_inputs(accuracy, "accuracy", th);
  if (!(ref.accuracy > 0.0)) throw std::invalid_argument("teacher accuracy must be > 0");
  // 1 - 1/(1+exp(s*(r - a_th))) == logistic(s*(r - a_th))
  return logistic(th.steepness * (accuracy / ref.accuracy - th.a_th));
}

double latency_reward(double latency_seconds, const TeacherReference& ref, const Thresholds& th) {
  check_inputs(latency_seconds, "latency", th);
  if (!(ref.latency > 0.0)) throw std::invalid_argument("teacher latency must be > 0");
  return logistic(-th.steepness * (latency_seconds / ref.latency - th.t_th));
}

double size_reward(long long parameters, const TeacherReference& ref, const Thresholds& th) {
  check_inputs(static_cast<double>(parameters), "parameter count", th);
  if (!(ref.parameters > 0)) throw std::invalid_argument("teacher parameter count must be > 0");
  double ratio = static_cast<double>(parameters) / static_cast<double>(ref.parameters);
  return logistic(-th.steepness * (ratio - th.c_th));
}

RewardBreakdown combined_reward(double accuracy, double latency_seconds, long long parameters,
                                const TeacherReference& ref, const Thresholds& th) {
  RewardBreakdown r;
  r.accuracy = accuracy_reward(accuracy, ref, th);
  r.latency = latency_reward(latency_seconds, ref, th);
  r.size = size_reward(parameters, ref, th);
  r.combined = r.accuracy * r.latency * r.size;
  return r;
}

RewardBreakdown penalty_reward(const TeacherReference& ref, const Thresholds& th) {
  return combined_reward(0.0, ref.latency, ref.parameters, ref, th);
}

}  // namespace ddc
