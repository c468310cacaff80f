#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "ocusum/detector.hpp"
#include "ocusum/model.hpp"
#include "ocusum/ordering.hpp"
#include "ocusum/rng.hpp"
#include "ocusum/scenario.hpp"

namespace ocusum {

/// One Monte Carlo experiment: scenario, weight scheme, false-alarm
/// floor, change time, run shape and seeding. b empty means "calibrate
/// against gamma"; xi empty means the automatic scheme value.
struct ExperimentConfig {
  ScenarioSpec scenario;
  std::optional<double> xi;           // empty => auto_xi(K)
  double gamma = 1000.0;              // E_inf(n') >= gamma
  std::int64_t tau = kNoChange;       // change slot; kNoChange => never
  std::int64_t horizon = 1000;
  int runs = 1000;
  std::uint64_t master_seed = 1;
  std::optional<double> b;            // empty => calibrate
  double eta = 1e-3;                  // transmit-time scale, reporting only

  void validate() const {
    if (!(gamma >= 1.0)) throw ValidationError("gamma must be >= 1");
    if (runs < 1) throw ValidationError("runs must be >= 1");
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    if (tau < 1) throw ValidationError("tau must be >= 1");
    if (b && !(*b > 0.0)) throw ValidationError("threshold b must be positive");
    if (!(eta > 0.0)) throw ValidationError("eta must be positive");
  }
};

/// Aggregated transmission-savings results of one experiment.
struct SavingsReport {
  double total_saved = 0.0;                  // K_s: mean over runs of sum_n (K - k*_n)
  std::vector<double> per_slot_saved;        // pooled mean of K - k*_n at each slot
  std::vector<double> per_slot_bound_probability;  // Pr^(W_{n-1}=0 and all L_k<0)
  double lower_bound_empirical = 0.0;        // sum_n (ceil(K/2)-1) Pr^(W_{n-1}=0, all L<0)
  double lower_bound_limit = 0.0;            // (ceil(K/2)-1)(tau'-1), tau' = min(tau, horizon+1)
  std::optional<double> wadd;                // E_1[n'-1], tau = 1 runs only
  double calibrated_b = 0.0;

  // Run diagnostics.
  double max_pair_diff = 0.0;                // max |W(ordered) - W(centralized)|
  std::int64_t declared_runs = 0;            // centralized W crossed b within the horizon
  std::int64_t wadd_censored_runs = 0;
  double mean_transmissions_used = 0.0;      // ordered protocol, per run
  double calibration_censor_fraction = 0.0;
  bool calibration_censor_warning = false;   // > 1% of calibration runs censored
};

namespace detail {

/// Runs fn(i) for i in [0, count) on a small worker pool. Results must be
/// written to per-index slots; any aggregation happens afterwards in
/// index order, so scheduling cannot influence outputs.
template <typename Fn>
void parallel_for(int count, Fn&& fn) {
  unsigned workers = std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(count));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

/// Prefix-maximum records of one no-change CUSUM trajectory: the slots
/// where W reaches a new high, with strictly increasing values. The first
/// crossing time of any level b reads off the records exactly.
struct CrossingRecords {
  std::vector<std::pair<std::int64_t, double>> records;
  std::int64_t horizon = 0;

  std::optional<std::int64_t> first_crossing(double level) const {
    auto it = std::lower_bound(records.begin(), records.end(), level,
                               [](const auto& rec, double v) { return rec.second < v; });
    if (it == records.end()) return std::nullopt;
    return it->first;
  }
};

inline CrossingRecords no_change_records(const StatisticEngine& engine, std::int64_t horizon,
                                         std::uint64_t seed) {
  CrossingRecords out;
  out.horizon = horizon;
  Rng rng(seed);
  Eigen::VectorXd x;
  double value = 0.0;
  double best = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    engine.sample_into(Hypothesis::pre, rng, x);
    value = std::max(0.0, value + engine.slot_sum(x));
    if (value > best) {
      best = value;
      out.records.emplace_back(n, value);
    }
  }
  return out;
}

struct CalibrationResult {
  double b = 0.0;
  double censor_fraction = 0.0;
};

/// Smallest b on the 0.01 grid with the Monte Carlo estimate of
/// E_inf(T_CS(b)) at or above gamma. One no-change pass per run (horizon
/// 10*gamma, common random numbers across grid points); censored runs
/// contribute the horizon as a lower bound on the stopping time.
inline CalibrationResult calibrate(const StatisticEngine& engine, double gamma, int runs,
                                   std::uint64_t master_seed) {
  constexpr double kGrid = 0.01;
  constexpr std::int64_t kMaxGridIndex = 100000;  // b_max = 1000
  const std::int64_t horizon =
      std::max<std::int64_t>(static_cast<std::int64_t>(std::ceil(10.0 * gamma)), 10);

  std::vector<CrossingRecords> all(runs);
  parallel_for(runs, [&](int r) {
    all[r] = no_change_records(engine, horizon,
                               derive_seed(master_seed, seed_stream::calibration, r));
  });

  auto mean_stop = [&](double level) {
    double total = 0.0;
    for (const auto& rec : all) {
      const auto cross = rec.first_crossing(level);
      total += static_cast<double>(cross ? *cross : horizon);
    }
    return total / runs;
  };
  auto censor_fraction = [&](double level) {
    std::int64_t censored = 0;
    for (const auto& rec : all) {
      if (!rec.first_crossing(level)) ++censored;
    }
    return static_cast<double>(censored) / runs;
  };

  std::int64_t lo = 0;  // largest grid index known to miss gamma (0 = none)
  std::int64_t hi = 1;
  while (mean_stop(kGrid * hi) < gamma) {
    lo = hi;
    hi *= 2;
    if (hi > kMaxGridIndex) {
      throw CalibrationFailedError("no b <= 1000 satisfies the false-alarm constraint");
    }
  }
  while (hi - lo > 1) {
    const std::int64_t mid = lo + (hi - lo) / 2;
    (mean_stop(kGrid * mid) >= gamma ? hi : lo) = mid;
  }
  return CalibrationResult{kGrid * hi, censor_fraction(kGrid * hi)};
}

/// Per-run record of the paired full-horizon pass.
struct PairedRunRecord {
  std::vector<std::uint16_t> k_star;       // per slot
  std::vector<std::uint8_t> bound_event;   // W_{n-1} = 0 and all L_k < 0
  std::optional<std::int64_t> first_cross; // centralized W vs b
  double max_pair_diff = 0.0;
  std::int64_t transmissions = 0;
};

/// Simulates one run over the full horizon: the ordered protocol and the
/// centralized recursion advance on the same observations; a threshold
/// crossing is recorded but does not stop or reset either recursion, so
/// transmission accounting always covers every slot.
inline PairedRunRecord paired_full_horizon(const StatisticEngine& engine, double b,
                                           std::int64_t tau, std::int64_t horizon,
                                           std::uint64_t seed) {
  PairedRunRecord rec;
  rec.k_star.reserve(horizon);
  rec.bound_event.reserve(horizon);
  Rng rng(seed);
  Eigen::VectorXd x;
  std::vector<double> raw;
  double w_ordered = 0.0;
  double w_central = 0.0;
  for (std::int64_t n = 1; n <= horizon; ++n) {
    const Hypothesis h = n >= tau ? Hypothesis::post : Hypothesis::pre;
    engine.sample_into(h, rng, x);
    engine.compute_raw(x, raw);
    const bool zero_start = w_central == 0.0;
    bool all_negative = true;
    for (double v : raw) {
      if (!(v < 0.0)) {
        all_negative = false;
        break;
      }
    }
    rec.bound_event.push_back(zero_start && all_negative ? 1 : 0);

    SlotStatistics stats = SlotStatistics::from_raw(raw);
    auto core = detail::ordered_slot_core(w_ordered, stats.raw, stats.order, nullptr, nullptr);
    w_ordered = core.next_value;
    w_central = std::max(0.0, w_central + stats.global_llr);
    rec.k_star.push_back(static_cast<std::uint16_t>(core.transmissions_used));
    rec.transmissions += core.transmissions_used;
    rec.max_pair_diff = std::max(rec.max_pair_diff, std::abs(w_ordered - w_central));
    if (!rec.first_cross && w_central >= b) rec.first_cross = n;
  }
  return rec;
}

inline int bound_coefficient(int clique_count) {
  return (clique_count + 1) / 2 - 1;  // ceil(K/2) - 1
}

}  // namespace detail

/// Smallest threshold on the 0.01 grid meeting the false-alarm floor
/// E_inf(T_CS(b)) >= gamma, estimated from config.runs no-change runs.
inline double calibrate_threshold(const ExperimentConfig& config) {
  config.validate();
  if (config.b) throw ValidationError("config already fixes b; nothing to calibrate");
  GaussianScenario scenario = build_scenario(config.scenario);
  const int k = scenario.seq.clique_count;
  CoefficientSet coeffs = k >= 2 ? build_coefficients(k, config.xi ? *config.xi : auto_xi(k))
                                 : CoefficientSet();
  StatisticEngine engine(std::move(scenario), std::move(coeffs));
  return detail::calibrate(engine, config.gamma, config.runs, config.master_seed).b;
}

/// Paired ordered/centralized savings experiment. Runs config.runs
/// full-horizon simulations, pools per-slot savings and the
/// savings-lower-bound estimate across runs, and estimates the worst-case
/// detection delay when tau = 1.
inline SavingsReport savings_experiment(const ExperimentConfig& config) {
  config.validate();
  GaussianScenario scenario = build_scenario(config.scenario);
  const int k_count = scenario.seq.clique_count;
  CoefficientSet coeffs =
      k_count >= 2 ? build_coefficients(k_count, config.xi ? *config.xi : auto_xi(k_count))
                   : CoefficientSet();
  StatisticEngine engine(std::move(scenario), std::move(coeffs));

  SavingsReport report;
  if (config.b) {
    report.calibrated_b = *config.b;
  } else {
    auto cal = detail::calibrate(engine, config.gamma, config.runs, config.master_seed);
    report.calibrated_b = cal.b;
    report.calibration_censor_fraction = cal.censor_fraction;
    report.calibration_censor_warning = cal.censor_fraction > 0.01;
  }

  const std::int64_t horizon = config.horizon;
  std::vector<detail::PairedRunRecord> records(config.runs);
  detail::parallel_for(config.runs, [&](int r) {
    records[r] = detail::paired_full_horizon(
        engine, report.calibrated_b, config.tau, horizon,
        derive_seed(config.master_seed, seed_stream::experiment, r));
  });

  report.per_slot_saved.assign(horizon, 0.0);
  std::vector<double> bound_hits(horizon, 0.0);
  double saved_total = 0.0;
  double transmissions_total = 0.0;
  double wadd_total = 0.0;
  for (const auto& rec : records) {
    for (std::int64_t n = 0; n < horizon; ++n) {
      report.per_slot_saved[n] += k_count - rec.k_star[n];
      bound_hits[n] += rec.bound_event[n];
    }
    saved_total += static_cast<double>(horizon) * k_count - rec.transmissions;
    transmissions_total += rec.transmissions;
    report.max_pair_diff = std::max(report.max_pair_diff, rec.max_pair_diff);
    if (rec.first_cross) {
      ++report.declared_runs;
      wadd_total += static_cast<double>(*rec.first_cross - 1);
    } else {
      ++report.wadd_censored_runs;
      wadd_total += static_cast<double>(horizon - 1);  // lower bound
    }
  }
  const double runs = config.runs;
  for (std::int64_t n = 0; n < horizon; ++n) {
    report.per_slot_saved[n] /= runs;
    bound_hits[n] /= runs;
  }
  report.total_saved = saved_total / runs;
  report.mean_transmissions_used = transmissions_total / runs;

  const double coeff = detail::bound_coefficient(k_count);
  double bound_sum = 0.0;
  for (double p : bound_hits) bound_sum += p;
  report.lower_bound_empirical = coeff * bound_sum;
  report.per_slot_bound_probability = std::move(bound_hits);
  const std::int64_t tau_eff = std::min(config.tau, horizon + 1);
  report.lower_bound_limit = coeff * static_cast<double>(tau_eff - 1);

  if (config.tau == 1 && std::isfinite(report.calibrated_b)) {
    report.wadd = wadd_total / runs;
  }
  return report;
}

enum class SweepVariable { c, x, K };

struct SweepRow {
  double value = 0.0;
  SavingsReport report;
};

/// One savings_experiment per value. Each cell derives its own master
/// seed from (config seed, cell index); the swept variable replaces the
/// matching scenario parameter. A mean-shift c sweep keeps the same
/// graph and covariance in every cell, so its threshold is calibrated
/// once on the base scenario and reused; K and x sweeps change the
/// model itself and recalibrate per cell.
inline std::vector<SweepRow> sweep(const ExperimentConfig& config, SweepVariable variable,
                                   const std::vector<double>& values) {
  if (values.empty()) throw ValidationError("sweep needs at least one value");

  std::optional<double> shared_b = config.b;
  std::optional<detail::CalibrationResult> shared_calibration;
  if (!shared_b && variable == SweepVariable::c) {
    GaussianScenario scenario = build_scenario(config.scenario);
    const int k = scenario.seq.clique_count;
    CoefficientSet coeffs =
        k >= 2 ? build_coefficients(k, config.xi ? *config.xi : auto_xi(k)) : CoefficientSet();
    StatisticEngine engine(std::move(scenario), std::move(coeffs));
    shared_calibration =
        detail::calibrate(engine, config.gamma, config.runs, config.master_seed);
    shared_b = shared_calibration->b;
  }

  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    ExperimentConfig cell = config;
    cell.master_seed = derive_seed(config.master_seed, seed_stream::sweep_cell, i);
    cell.b = shared_b;
    switch (variable) {
      case SweepVariable::c:
        if (cell.scenario.model != ScenarioSpec::ModelKind::mean_shift) {
          throw ValidationError("sweeping c requires the mean_shift model");
        }
        cell.scenario.c = values[i];
        break;
      case SweepVariable::x:
        if (cell.scenario.model != ScenarioSpec::ModelKind::cov_change) {
          throw ValidationError("sweeping x requires the cov_change model");
        }
        cell.scenario.x = values[i];
        break;
      case SweepVariable::K: {
        const double rounded = std::round(values[i]);
        if (rounded < 1 || rounded != values[i]) {
          throw ValidationError("swept K values must be positive integers");
        }
        if (cell.scenario.graph.kind == GraphSpec::Kind::explicit_edges ||
            cell.scenario.post_graph) {
          throw ValidationError("sweeping K requires a chain or tree graph");
        }
        cell.scenario.graph.clique_count = static_cast<int>(rounded);
        break;
      }
    }
    SweepRow row{values[i], savings_experiment(cell)};
    if (shared_calibration) {
      row.report.calibration_censor_fraction = shared_calibration->censor_fraction;
      row.report.calibration_censor_warning = shared_calibration->censor_fraction > 0.01;
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ocusum
