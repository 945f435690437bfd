// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

namespace ddc {

/// Reward shaping constants. Each component reward is a sigmoid centered at
/// its threshold ratio, so a candidate sitting exactly at a threshold scores
/// 0.5 on that component.
struct Thresholds {
  double a_th = 0.9;       // accuracy ratio threshold
  double t_th = 0.3;       // latency ratio threshold
  double c_th = 0.6;       // parameter-count ratio threshold
  double steepness = 15.0; // sigmoid slope

  friend bool operator==(const Thresholds&, const Thresholds&) = default;
};

/// Measured metrics of the teacher model; denominators of the reward ratios.
struct TeacherReference {
  double accuracy = 0.0;       // fraction in (0,1]
  double latency = 0.0;        // seconds
  long long parameters = 0;

  friend bool operator==(const TeacherReference&, const TeacherReference&) = default;
};

struct RewardBreakdown {
  double accuracy = 0.0;
  double latency = 0.0;
  double size = 0.0;
  double combined = 0.0;
};

/// Higher accuracy -> higher reward; 0.5 at a/A_teacher == a_th.
double accuracy_reward(double accuracy, const TeacherReference& ref, const Thresholds& th);

/// Lower latency -> higher reward; 0.5 at t/T_teacher == t_th.
double latency_reward(double latency_seconds, const TeacherReference& ref, const Thresholds& th);

/// Fewer parameters -> higher reward; 0.5 at c/C_teacher == c_th.
double size_reward(long long parameters, const TeacherReference& ref, const Thresholds& th);

/// Product of the three component rewards, with the components kept for logging.
RewardBreakdown combined_reward(double accuracy, double latency_seconds, long long parameters,
                                const TeacherReference& ref, const Thresholds& th);

/// Breakdown assigned to students that could not be derived or trained:
/// scored as if they had zero accuracy at teacher latency and teacher size.
/// Keeps the reward strictly positive and continuous instead of a hard zero.
RewardBreakdown penalty_reward(const TeacherReference& ref, const Thresholds& th);

}  // namespace ddc
