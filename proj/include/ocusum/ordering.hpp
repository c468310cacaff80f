#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "ocusum/detector.hpp"
#include "ocusum/model.hpp"

namespace ocusum {

/// Result of one ordered-transmission round: the next CUSUM value, the
/// number of transmissions actually used, and the partial sums and
/// adaptive thresholds seen at each executed step.
struct SlotOutcome {
  double next_value = 0.0;
  int transmissions_used = 0;                         // k*
  bool halted_early = false;
  std::vector<double> partial_sums;                   // W_{n,k_1} .. W_{n,k_(k*)}
  std::vector<double> thresholds;                     // phi at each step
  std::optional<std::vector<double>> transmit_times;  // reporting only
};

/// Transmission schedule t_{n,k} = t_n + eta / |L_k|; a zero statistic
/// maps to +infinity (never transmits first). Reporting only: the engine
/// orders by magnitude directly and never divides by |L_k|.
inline std::vector<double> transmit_times(const SlotStatistics& stats, double eta,
                                          double slot_start) {
  if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  std::vector<double> times(stats.raw.size());
  for (std::size_t k = 0; k < stats.raw.size(); ++k) {
    const double mag = std::abs(stats.raw[k]);
    times[k] = mag > 0.0 ? slot_start + eta / mag
                         : std::numeric_limits<double>::infinity();
  }
  return times;
}

namespace detail {

struct OrderedSlotCore {
  double next_value = 0.0;
  int transmissions_used = 0;
  bool halted_early = false;
};

/// Allocation-free core of the ordered round. Walks the magnitude order,
/// accumulates partial sums and halts once the partial sum can no longer
/// be pulled above zero by the untransmitted statistics. At the final
/// step the threshold is exactly zero, so the comparison reproduces the
/// max{0, .} clamp of the centralized recursion.
inline OrderedSlotCore ordered_slot_core(double prev_value, const std::vector<double>& raw,
                                         const std::vector<int>& order,
                                         std::vector<double>* partial_sums,
                                         std::vector<double>* thresholds) {
  const int k_count = static_cast<int>(raw.size());
  double partial = prev_value;
  for (int j = 1; j <= k_count; ++j) {
    const double value = raw[order[j - 1] - 1];
    partial += value;
    const double phi = -static_cast<double>(k_count - j) * std::abs(value);
    if (partial_sums) partial_sums->push_back(partial);
    if (thresholds) thresholds->push_back(phi);
    if (partial <= phi) {
      // Early only when untransmitted statistics remain (j < K).
      return OrderedSlotCore{0.0, j, j < k_count};
    }
  }
  return OrderedSlotCore{partial, k_count, false};
}

}  // namespace detail

/// One ordered-transmission round against the previous CUSUM value.
inline SlotOutcome run_slot(double prev_value, const SlotStatistics& stats) {
  if (!(prev_value >= 0.0)) throw ValidationError("previous CUSUM value must be nonnegative");
  SlotOutcome outcome;
  auto core = detail::ordered_slot_core(prev_value, stats.raw, stats.order,
                                        &outcome.partial_sums, &outcome.thresholds);
  outcome.next_value = core.next_value;
  outcome.transmissions_used = core.transmissions_used;
  outcome.halted_early = core.halted_early;
  return outcome;
}

/// run_slot with the reporting-only transmission schedule attached.
inline SlotOutcome run_slot(double prev_value, const SlotStatistics& stats, double eta,
                            double slot_start) {
  SlotOutcome outcome = run_slot(prev_value, stats);
  outcome.transmit_times = transmit_times(stats, eta, slot_start);
  return outcome;
}

/// Brute-force halting index: the smallest k' < K whose partial sum sits
/// at or below -(K-k')|L-hat_{k'}|, or K when no such k' exists.
/// Independent of run_slot; used purely for testing.
inline int k_star_oracle(double prev_value, const SlotStatistics& stats) {
  const int k_count = stats.clique_count();
  std::vector<int> by_magnitude(k_count);
  std::iota(by_magnitude.begin(), by_magnitude.end(), 0);
  std::stable_sort(by_magnitude.begin(), by_magnitude.end(), [&](int a, int b) {
    return std::abs(stats.raw[a]) > std::abs(stats.raw[b]);
  });
  for (int cut = 1; cut < k_count; ++cut) {
    double sum = prev_value;
    for (int j = 0; j < cut; ++j) sum += stats.raw[by_magnitude[j]];
    if (sum <= -static_cast<double>(k_count - cut) * std::abs(stats.raw[by_magnitude[cut - 1]])) {
      return cut;
    }
  }
  return k_count;
}

/// Per-slot transmission accounting of an ordered run.
struct SavingsTrace {
  std::vector<std::int64_t> slot;
  std::vector<int> k_star;
  std::vector<int> saved;  // K - k*
  std::vector<double> value;
  std::vector<std::uint8_t> halted_early;

  std::int64_t total_saved() const {
    return std::accumulate(saved.begin(), saved.end(), std::int64_t{0});
  }
};

struct OrderedRun {
  DetectionOutcome outcome;
  std::vector<double> trajectory;
  SavingsTrace trace;
  std::int64_t transmissions = 0;  // sum of k* over elapsed slots
};

/// Ordered-CUSUM run: same sampling and stopping semantics as
/// run_centralized, but each slot executes the ordered round and records
/// the transmissions actually used. With the same seed the W trajectory
/// matches the centralized one up to summation order.
inline OrderedRun run_ordered(const StatisticEngine& engine, double b, std::int64_t tau,
                              std::int64_t horizon, Rng& rng) {
  if (!(b > 0.0)) throw ValidationError("threshold b must be positive");
  if (horizon < 1) throw ValidationError("horizon must be >= 1");
  OrderedRun run;
  run.outcome.threshold = b;
  const int k_count = engine.clique_count();
  double value = 0.0;
  Eigen::VectorXd x;
  std::vector<double> raw;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const Hypothesis h = n >= tau ? Hypothesis::post : Hypothesis::pre;
    engine.sample_into(h, rng, x);
    engine.compute_raw(x, raw);
    SlotStatistics stats = SlotStatistics::from_raw(raw);
    auto core = detail::ordered_slot_core(value, stats.raw, stats.order, nullptr, nullptr);
    value = core.next_value;
    run.trajectory.push_back(value);
    run.trace.slot.push_back(n);
    run.trace.k_star.push_back(core.transmissions_used);
    run.trace.saved.push_back(k_count - core.transmissions_used);
    run.trace.value.push_back(value);
    run.trace.halted_early.push_back(core.halted_early ? 1 : 0);
    run.transmissions += core.transmissions_used;
    if (value >= b) {
      run.outcome.declared = true;
      run.outcome.stop_slot = n;
      return run;
    }
  }
  run.outcome.stop_slot = horizon;  // censored
  return run;
}

inline OrderedRun run_ordered(const GaussianScenario& scenario, const CoefficientSet& coeffs,
                              double b, std::int64_t tau, std::int64_t horizon, Rng& rng) {
  return run_ordered(StatisticEngine(scenario, coeffs), b, tau, horizon, rng);
}

}  // namespace ocusum
