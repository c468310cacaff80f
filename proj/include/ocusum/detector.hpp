#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "ocusum/model.hpp"
#include "ocusum/rng.hpp"

namespace ocusum {

/// Change-time sentinel: the change never occurs (every slot pre-change).
inline constexpr std::int64_t kNoChange = std::numeric_limits<std::int64_t>::max();

/// Running CUSUM value and slot counter. W is clamped at zero.
struct CusumState {
  double value = 0.0;
  std::int64_t slot = 0;
};

inline CusumState cusum_update(CusumState state, double slot_sum) {
  return CusumState{std::max(0.0, state.value + slot_sum), state.slot + 1};
}

/// Brute-force GLR statistic max{0, max_{n'} sum_{i=n'..n} llr_i},
/// evaluated by direct suffix enumeration. Serves as the independent
/// oracle for the CUSUM recursion.
inline double glr_statistic(std::span<const double> slot_llrs) {
  double best = -std::numeric_limits<double>::infinity();
  double suffix = 0.0;
  for (auto it = slot_llrs.rbegin(); it != slot_llrs.rend(); ++it) {
    suffix += *it;
    best = std::max(best, suffix);
  }
  return std::max(0.0, best);
}

/// Stopping decision of one run. When the run ends by declaration,
/// stop_slot is the declaration slot; a run reaching the horizon is
/// censored and records the horizon as a lower bound on the stop time.
struct DetectionOutcome {
  bool declared = false;
  std::optional<std::int64_t> stop_slot;
  double threshold = 0.0;
};

struct CentralizedRun {
  DetectionOutcome outcome;
  std::vector<double> trajectory;   // W_1 .. W_(slots simulated)
  std::int64_t transmissions = 0;   // K per elapsed slot
};

/// Centralized CUSUM run: samples pre-change observations for n < tau and
/// post-change from n >= tau, accumulates the slot sums through the
/// recursion and stops at the first W_n >= b or at the horizon. Every
/// slot costs K clique transmissions (the unconstrained baseline).
inline CentralizedRun run_centralized(const StatisticEngine& engine, double b,
                                      std::int64_t tau, std::int64_t horizon, Rng& rng) {
  if (!(b > 0.0)) throw ValidationError("threshold b must be positive");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  CentralizedRun run;
  run.outcome.threshold = b;
  run.trajectory.reserve(std::min<std::int64_t>(horizon, 1 << 20));
  CusumState state;
  Eigen::VectorXd x;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const Hypothesis h = n >= tau ? Hypothesis::post : Hypothesis::pre;
    engine.sample_into(h, rng, x);
    state = cusum_update(state, engine.slot_sum(x));
    run.trajectory.push_back(state.value);
    run.transmissions += engine.clique_count();
    if (state.value >= b) {
      run.outcome.declared = true;
      run.outcome.stop_slot = n;
      return run;
    }
  }
  run.outcome.stop_slot = horizon;  // censored
  return run;
}

inline CentralizedRun run_centralized(const GaussianScenario& scenario,
                                      const CoefficientSet& coeffs, double b,
                                      std::int64_t tau, std::int64_t horizon, Rng& rng) {
  return run_centralized(StatisticEngine(scenario, coeffs), b, tau, horizon, rng);
}

}  // namespace ocusum
