// SPDX-License-Identifier: Apache-2.0
#pragma once

// Property checks over the reward transformation, shared by the unit tests
// and the acceptance suite. Ratios are sampled in [0, 1.5], the range where
// the sigmoids are numerically strict; pairs are separated by at least 1e-9.

#include <cmath>
#include <random>
#include <string>

#include "ddc/reward.hpp"
#include "ddc/rng.hpp"

namespace ddc::testsupport {

struct PropertyResult {
  bool ok = true;
  std::string failure;
};

inline PropertyResult check_reward_properties(int cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Thresholds th;
  PropertyResult res;
  auto fail = [&res](const std::string& msg) {
    if (res.ok) {
      res.ok = false;
      res.failure = msg;
    }
  };

  for (int i = 0; i < cases && res.ok; ++i) {
    const TeacherReference ref{uniform_range(rng, 0.4, 1.0), uniform_range(rng, 1e-4, 1.0),
                               1 + static_cast<long long>(uniform01(rng) * 1e7)};
    double r1 = uniform_range(rng, 0.0, 1.5);
    double r2 = uniform_range(rng, 0.0, 1.5);
    if (std::abs(r1 - r2) < 1e-9) r2 = r1 + 1e-6;
    const double lo = std::min(r1, r2), hi = std::max(r1, r2);

    // range
    const double a = accuracy_reward(lo * ref.accuracy, ref, th);
    const double t = latency_reward(lo * ref.latency, ref, th);
    const long long c_lo = static_cast<long long>(lo * static_cast<double>(ref.parameters));
    const long long c_hi = static_cast<long long>(hi * static_cast<double>(ref.parameters)) + 1;
    const double c = size_reward(c_lo, ref, th);
    if (!(a > 0.0 && a < 1.0 && t > 0.0 && t < 1.0 && c > 0.0 && c < 1.0))
      fail("component out of (0,1)");

    // monotonicity: accuracy increasing, latency and size decreasing
    if (!(accuracy_reward(lo * ref.accuracy, ref, th) <
          accuracy_reward(hi * ref.accuracy, ref, th)))
      fail("accuracy reward not strictly increasing");
    if (!(latency_reward(lo * ref.latency, ref, th) > latency_reward(hi * ref.latency, ref, th)))
      fail("latency reward not strictly decreasing");
    if (!(size_reward(c_lo, ref, th) > size_reward(c_hi, ref, th)))
      fail("size reward not strictly decreasing");

    // argmax invariance under common per-metric rescaling
    const TeacherReference ref2{ref.accuracy * 0.5, ref.latency * 3.0, ref.parameters * 7};
    const double a1 = uniform_range(rng, 0.0, 1.2), a2 = uniform_range(rng, 0.0, 1.2);
    const double t1 = uniform_range(rng, 0.05, 1.2), t2 = uniform_range(rng, 0.05, 1.2);
    const long long c1 = 1 + static_cast<long long>(uniform01(rng) * ref.parameters);
    const long long c2 = 1 + static_cast<long long>(uniform01(rng) * ref.parameters);
    const double ra = combined_reward(a1 * ref.accuracy, t1 * ref.latency, c1, ref, th).combined;
    const double rb = combined_reward(a2 * ref.accuracy, t2 * ref.latency, c2, ref, th).combined;
    const double sa =
        combined_reward(a1 * ref2.accuracy, t1 * ref2.latency, c1 * 7, ref2, th).combined;
    const double sb =
        combined_reward(a2 * ref2.accuracy, t2 * ref2.latency, c2 * 7, ref2, th).combined;
    if ((ra > rb) != (sa > sb)) fail("argmax changed under common rescaling");
  }
  return res;
}

// Numerical Lipschitz check: |R(x+eps)-R(x)| <= steepness*eps/(4*ref) per
// component, evaluated on a grid.
inline PropertyResult check_reward_continuity(int grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Thresholds th;
  const TeacherReference ref{uniform_range(rng, 0.5, 1.0), uniform_range(rng, 0.01, 1.0),
                             1000000};
  PropertyResult res;
  const double eps_ratio = 1e-4;
  for (int i = 0; i <= grid && res.ok; ++i) {
    const double ratio = 1.5 * static_cast<double>(i) / grid;
    const double bound_slack = 1.0 + 1e-9;
    const double da = std::abs(accuracy_reward((ratio + eps_ratio) * ref.accuracy, ref, th) -
                               accuracy_reward(ratio * ref.accuracy, ref, th));
    if (da > bound_slack * th.steepness * eps_ratio / 4.0) {
      res.ok = false;
      res.failure = "accuracy reward violates the sigmoid Lipschitz bound";
    }
    const double dt = std::abs(latency_reward((ratio + eps_ratio) * ref.latency, ref, th) -
                               latency_reward(ratio * ref.latency, ref, th));
    if (dt > bound_slack * th.steepness * eps_ratio / 4.0) {
      res.ok = false;
      res.failure = "latency reward violates the sigmoid Lipschitz bound";
    }
  }
  return res;
}

}  // namespace ddc::testsupport
