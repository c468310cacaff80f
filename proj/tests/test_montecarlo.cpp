#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "ocusum/montecarlo.hpp"

using namespace ocusum;

namespace {

ExperimentConfig chain_config(int k_count, double c) {
  ExperimentConfig config;
  config.scenario.graph.kind = GraphSpec::Kind::chain;
  config.scenario.graph.clique_count = k_count;
  config.scenario.model = ScenarioSpec::ModelKind::mean_shift;
  config.scenario.c = c;
  return config;
}

}  // namespace

TEST_CASE("ExperimentConfig validation") {
  ExperimentConfig config = chain_config(2, 1.0);
  config.gamma = 0.5;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.gamma = 10.0;
  config.runs = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.runs = 1;
  config.horizon = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.horizon = 10;
  config.tau = 0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.tau = 1;
  config.b = -1.0;
  CHECK_THROWS_AS(config.validate(), ValidationError);
  config.b = 1.0;
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("calibrate_threshold: gamma = 1 is satisfied by the smallest grid point") {
  ExperimentConfig config = chain_config(2, 1.0);
  config.gamma = 1.0;
  config.runs = 20;
  config.master_seed = 5;
  CHECK(calibrate_threshold(config) == doctest::Approx(0.01));
}

TEST_CASE("calibrate_threshold: refuses a config that already fixes b") {
  ExperimentConfig config = chain_config(2, 1.0);
  config.b = 1.0;
  CHECK_THROWS_AS(calibrate_threshold(config), ValidationError);
}

TEST_CASE("calibrated threshold is nondecreasing in gamma") {
  // Weak shift so the threshold actually moves with gamma.
  double previous = 0.0;
  for (double gamma : {10.0, 100.0, 1000.0}) {
    ExperimentConfig config = chain_config(2, 0.3);
    config.gamma = gamma;
    config.runs = 50;
    config.master_seed = 99;
    const double b = calibrate_threshold(config);
    CHECK(b >= previous);
    previous = b;
  }
  CHECK(previous > 0.01);  // gamma = 1000 must push past the first grid point
}

TEST_CASE("savings_experiment: vacuous bound at K = 2") {
  ExperimentConfig config = chain_config(2, 1.0);
  config.tau = kNoChange;
  config.horizon = 100;
  config.runs = 20;
  config.b = 50.0;
  config.master_seed = 7;
  auto report = savings_experiment(config);
  CHECK(report.lower_bound_empirical == 0.0);
  CHECK(report.lower_bound_limit == 0.0);
  CHECK(report.total_saved >= 0.0);
  CHECK_FALSE(report.wadd.has_value());
}

TEST_CASE("savings_experiment: single-clique graph never saves transmissions") {
  ExperimentConfig config = chain_config(1, 2.0);  // triangle, K = 1
  config.tau = kNoChange;
  config.horizon = 50;
  config.runs = 8;
  config.b = 10.0;
  config.master_seed = 12;
  auto report = savings_experiment(config);
  CHECK(report.total_saved == 0.0);
  CHECK(report.lower_bound_empirical == 0.0);
  CHECK(report.max_pair_diff < 1e-12);
}

TEST_CASE("savings_experiment: savings grow with the shift size") {
  auto run_with_c = [&](double c) {
    ExperimentConfig config = chain_config(10, c);
    config.tau = kNoChange;
    config.horizon = 300;
    config.runs = 30;
    config.b = 1e6;
    config.master_seed = 4242;
    return savings_experiment(config).total_saved;
  };
  CHECK(run_with_c(0.1) < run_with_c(40.0));
}

TEST_CASE("savings_experiment: per-slot bound holds within Monte Carlo error") {
  ExperimentConfig config = chain_config(4, 2.0);
  config.tau = kNoChange;
  config.horizon = 200;
  config.runs = 200;
  config.b = 1e6;
  config.master_seed = 31337;
  auto report = savings_experiment(config);
  const double coeff = 1.0;  // ceil(4/2) - 1
  REQUIRE(report.per_slot_saved.size() == 200);
  REQUIRE(report.per_slot_bound_probability.size() == 200);
  // Slot by slot: pooled mean savings dominate the halting-probability
  // bound up to a 3-sigma binomial margin on the probability estimate.
  for (std::size_t n = 0; n < 200; ++n) {
    const double p = report.per_slot_bound_probability[n];
    const double margin = 3.0 * coeff * std::sqrt(p * (1.0 - p) / config.runs);
    CHECK(report.per_slot_saved[n] >= coeff * p - margin - 1e-12);
  }
  double total_from_slots = 0.0;
  for (double v : report.per_slot_saved) total_from_slots += v;
  CHECK(total_from_slots == doctest::Approx(report.total_saved).epsilon(1e-9));
  double bound_from_slots = 0.0;
  for (double p : report.per_slot_bound_probability) bound_from_slots += coeff * p;
  CHECK(bound_from_slots == doctest::Approx(report.lower_bound_empirical).epsilon(1e-12));
}

TEST_CASE("sweep: tree covariance model saves more as x grows") {
  // Above x = 1 the post-change covariance moves away from the identity,
  // so larger x means more distinguishable hypotheses and more savings.
  // (Near x = 1 the two densities almost coincide and savings dip.)
  ExperimentConfig config;
  config.scenario.graph.kind = GraphSpec::Kind::tree;
  config.scenario.graph.clique_count = 8;
  config.scenario.model = ScenarioSpec::ModelKind::cov_change;
  config.scenario.x = 1.0;
  config.tau = kNoChange;
  config.horizon = 200;
  config.runs = 30;
  config.b = 1e6;
  config.master_seed = 61;
  auto rows = sweep(config, SweepVariable::x, {1.2, 1.5, 2.0});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].report.total_saved < rows[1].report.total_saved);
  CHECK(rows[1].report.total_saved < rows[2].report.total_saved);
}

TEST_CASE("savings_experiment: pair diagnostics stay within the equivalence tolerance") {
  ExperimentConfig config = chain_config(6, 1.0);
  config.tau = 1;
  config.horizon = 150;
  config.runs = 40;
  config.b = 4.0;
  config.master_seed = 808;
  auto report = savings_experiment(config);
  CHECK(report.max_pair_diff < 1e-9);
  CHECK(report.declared_runs == 40);  // tau = 1 with a clear shift always declares
  REQUIRE(report.wadd.has_value());
  CHECK(*report.wadd >= 0.0);
  CHECK(*report.wadd < 5.0);
}

TEST_CASE("savings_experiment: WADD at a huge shift is essentially zero") {
  ExperimentConfig config = chain_config(3, 40.0);
  config.tau = 1;
  config.horizon = 100;
  config.runs = 50;
  config.b = 5.0;
  config.master_seed = 1;
  auto report = savings_experiment(config);
  REQUIRE(report.wadd.has_value());
  CHECK(*report.wadd <= 1.0);
  CHECK(report.wadd_censored_runs == 0);
}

TEST_CASE("savings_experiment: heavy calibration censoring raises the warning flag") {
  // At a huge shift the pre-change trajectory never crosses even the
  // smallest grid threshold, so every calibration run censors; the
  // truncated mean still certifies the constraint and b stays at 0.01.
  ExperimentConfig config = chain_config(3, 40.0);
  config.tau = kNoChange;
  config.gamma = 10.0;
  config.horizon = 20;
  config.runs = 10;
  config.master_seed = 2;  // b stays on "calibrate"
  auto report = savings_experiment(config);
  CHECK(report.calibrated_b == doctest::Approx(0.01));
  CHECK(report.calibration_censor_fraction == 1.0);
  CHECK(report.calibration_censor_warning);
}

TEST_CASE("savings_experiment: deterministic across repeated evaluation") {
  ExperimentConfig config = chain_config(5, 1.5);
  config.tau = kNoChange;
  config.horizon = 120;
  config.runs = 32;
  config.b = 10.0;
  config.master_seed = 20240101;
  auto a = savings_experiment(config);
  auto b = savings_experiment(config);
  CHECK(a.total_saved == b.total_saved);
  CHECK(a.lower_bound_empirical == b.lower_bound_empirical);
  CHECK(a.max_pair_diff == b.max_pair_diff);
  REQUIRE(a.per_slot_saved.size() == b.per_slot_saved.size());
  for (std::size_t i = 0; i < a.per_slot_saved.size(); ++i) {
    CHECK(a.per_slot_saved[i] == b.per_slot_saved[i]);
  }
}

TEST_CASE("savings_experiment: limit bound uses tau' = min(tau, horizon + 1)") {
  ExperimentConfig config = chain_config(50, 40.0);
  config.horizon = 10;
  config.runs = 2;
  config.b = 1e6;
  config.master_seed = 3;

  config.tau = kNoChange;
  CHECK(savings_experiment(config).lower_bound_limit == doctest::Approx(24.0 * 10));

  config.tau = 5;
  CHECK(savings_experiment(config).lower_bound_limit == doctest::Approx(24.0 * 4));
}

TEST_CASE("sweep: single-value sweep equals a savings experiment on the derived seed") {
  ExperimentConfig config = chain_config(4, 2.0);
  config.tau = kNoChange;
  config.horizon = 80;
  config.runs = 16;
  config.b = 9.0;
  config.master_seed = 555;

  auto rows = sweep(config, SweepVariable::c, {2.5});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].value == 2.5);

  ExperimentConfig cell = config;
  cell.scenario.c = 2.5;
  cell.master_seed = derive_seed(config.master_seed, seed_stream::sweep_cell, 0);
  auto direct = savings_experiment(cell);
  CHECK(rows[0].report.total_saved == direct.total_saved);
  CHECK(rows[0].report.lower_bound_empirical == direct.lower_bound_empirical);
}

TEST_CASE("sweep: validation") {
  ExperimentConfig config = chain_config(4, 2.0);
  config.b = 1.0;
  CHECK_THROWS_AS(sweep(config, SweepVariable::c, {}), ValidationError);
  CHECK_THROWS_AS(sweep(config, SweepVariable::x, {1.0}), ValidationError);
  CHECK_THROWS_AS(sweep(config, SweepVariable::K, {2.5}), ValidationError);

  ExperimentConfig explicit_graph = config;
  explicit_graph.scenario.graph.kind = GraphSpec::Kind::explicit_edges;
  explicit_graph.scenario.graph.vertex_count = 3;
  explicit_graph.scenario.graph.edges = {{1, 2}, {2, 3}, {1, 3}};
  CHECK_THROWS_AS(sweep(explicit_graph, SweepVariable::K, {2.0}), ValidationError);
}

TEST_CASE("sweep: a c sweep calibrates once and reuses the threshold") {
  ExperimentConfig config = chain_config(3, 1.0);
  config.tau = kNoChange;
  config.gamma = 20.0;
  config.horizon = 50;
  config.runs = 20;
  config.master_seed = 22;  // b stays on "calibrate"
  auto rows = sweep(config, SweepVariable::c, {0.5, 1.0, 2.0});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].report.calibrated_b == rows[1].report.calibrated_b);
  CHECK(rows[1].report.calibrated_b == rows[2].report.calibrated_b);
  CHECK(rows[0].report.calibrated_b > 0.0);
}

TEST_CASE("sweep: K sweep produces one report per value") {
  ExperimentConfig config = chain_config(2, 40.0);
  config.tau = kNoChange;
  config.horizon = 60;
  config.runs = 10;
  config.b = 1e6;
  config.master_seed = 11;
  auto rows = sweep(config, SweepVariable::K, {4.0, 8.0});
  REQUIRE(rows.size() == 2);
  // More cliques, more absolute savings at a huge shift.
  CHECK(rows[1].report.total_saved > rows[0].report.total_saved);
}
