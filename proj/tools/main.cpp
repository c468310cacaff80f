#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ocusum/config.hpp"
#include "ocusum/csv.hpp"
#include "ocusum/detector.hpp"
#include "ocusum/graph.hpp"
#include "ocusum/model.hpp"
#include "ocusum/montecarlo.hpp"
#include "ocusum/ordering.hpp"
#include "ocusum/report.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ocusum;

// Exit codes: 0 ok, 1 unexpected, 2 parse, 3 validation, 4 numeric,
// 5 calibration.
enum ExitCode {
  kOk = 0,
  kUnexpected = 1,
  kParse = 2,
  kValidation = 3,
  kNumeric = 4,
  kCalibration = 5,
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::int64_t> seed;
  std::optional<int> runs;
  std::optional<std::string> out_dir;
  bool paper_scale = false;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("--config", opts.config_path, "config file (JSON)")->required();
  sub->add_option("--seed", opts.seed, "override master_seed");
  sub->add_option("--runs", opts.runs, "override run count");
  sub->add_option("--out", opts.out_dir, "output directory");
  sub->add_flag("--paper-scale", opts.paper_scale, "use 1000 runs");
}

ConfigFile load_with_overrides(const CommonOptions& opts) {
  ConfigFile config = load_config(opts.config_path);
  if (opts.seed) config.experiment.master_seed = static_cast<std::uint64_t>(*opts.seed);
  if (opts.runs) config.experiment.runs = *opts.runs;
  if (opts.paper_scale) config.experiment.runs = 1000;
  if (opts.out_dir) config.output_dir = *opts.out_dir;
  return config;
}

fs::path prepare_output(const ConfigFile& config) {
  fs::path dir(config.output_dir);
  fs::create_directories(dir);
  std::ofstream eff(dir / "effective_config.json", std::ios::binary);
  eff << effective_config(config).dump(2) << "\n";
  return dir;
}

void require_sections(const ConfigFile& config, bool model, bool detection, bool sweep_section) {
  if (model && !config.has_model) throw ParseError("config needs a 'model' section");
  if (detection && !config.has_detection) throw ParseError("config needs a 'detection' section");
  if (sweep_section && !config.sweep_variable) throw ParseError("config needs a 'sweep' section");
}

StatisticEngine make_engine(const ExperimentConfig& exp) {
  GaussianScenario scenario = build_scenario(exp.scenario);
  const int k = scenario.seq.clique_count;
  CoefficientSet coeffs =
      k >= 2 ? build_coefficients(k, exp.xi ? *exp.xi : auto_xi(k)) : CoefficientSet();
  return StatisticEngine(std::move(scenario), std::move(coeffs));
}

double resolve_threshold(const StatisticEngine& engine, const ExperimentConfig& exp) {
  if (exp.b) return *exp.b;
  auto cal = detail::calibrate(engine, exp.gamma, exp.runs, exp.master_seed);
  if (cal.censor_fraction > 0.01) {
    std::cerr << "warning: " << cal.censor_fraction * 100.0
              << "% of calibration runs were censored at the calibration horizon\n";
  }
  std::cout << "calibrated b = " << format_double(cal.b) << "\n";
  return cal.b;
}

int cmd_validate(const CommonOptions& opts) {
  ConfigFile config = load_with_overrides(opts);
  const auto& spec = config.experiment.scenario;
  if (spec.post_graph) {
    UndirectedGraph pre = build_graph(spec.graph);
    UndirectedGraph post = build_graph(*spec.post_graph);
    std::cout << "pre-change graph: M = " << pre.vertex_count() << ", decomposable = "
              << (check_decomposable(pre) ? "true" : "false") << "\n";
    std::cout << "post-change graph: M = " << post.vertex_count() << ", decomposable = "
              << (check_decomposable(post) ? "true" : "false") << "\n";
    UndirectedGraph joint = union_graph(pre, post);
    std::cout << "union graph: M = " << joint.vertex_count() << ", |E| = "
              << joint.edges().size() << "\n";
    print_sequence(std::cout, perfect_sequence(joint));
  } else {
    UndirectedGraph graph = build_graph(spec.graph);
    std::cout << "graph: M = " << graph.vertex_count() << ", |E| = " << graph.edges().size()
              << "\n";
    print_sequence(std::cout, perfect_sequence(graph));
  }
  std::cout << "ok\n";
  return kOk;
}

int cmd_simulate(const CommonOptions& opts, const std::string& mode) {
  ConfigFile config = load_with_overrides(opts);
  require_sections(config, true, true, false);
  const ExperimentConfig& exp = config.experiment;
  exp.validate();
  fs::path dir = prepare_output(config);

  StatisticEngine engine = make_engine(exp);
  const int k_count = engine.clique_count();
  const double b = resolve_threshold(engine, exp);
  const bool paired = mode == "paired";
  const bool want_ordered = paired || mode == "ordered";
  const bool want_centralized = paired || mode == "centralized";

  std::vector<OrderedRun> ordered(want_ordered ? exp.runs : 0);
  std::vector<CentralizedRun> centralized(want_centralized ? exp.runs : 0);
  detail::parallel_for(exp.runs, [&](int r) {
    const std::uint64_t seed = derive_seed(exp.master_seed, seed_stream::experiment, r);
    if (want_ordered) {
      Rng rng(seed);
      ordered[r] = run_ordered(engine, b, exp.tau, exp.horizon, rng);
    }
    if (want_centralized) {
      Rng rng(seed);
      centralized[r] = run_centralized(engine, b, exp.tau, exp.horizon, rng);
    }
  });

  CsvWriter outcomes((dir / "outcomes.csv").string());
  outcomes.row("run", "declared", "stop_slot", "transmissions_ordered",
               "transmissions_centralized", "saved");
  bool equivalent = true;
  double max_dw = 0.0;
  std::int64_t declared_count = 0;
  double wadd_sum = 0.0;
  std::int64_t wadd_censored = 0;
  for (int r = 0; r < exp.runs; ++r) {
    const DetectionOutcome& ref =
        want_centralized ? centralized[r].outcome : ordered[r].outcome;
    if (paired) {
      const auto& a = ordered[r].trajectory;
      const auto& c = centralized[r].trajectory;
      if (a.size() != c.size() ||
          ordered[r].outcome.declared != centralized[r].outcome.declared ||
          ordered[r].outcome.stop_slot != centralized[r].outcome.stop_slot) {
        equivalent = false;
      }
      for (std::size_t i = 0; i < std::min(a.size(), c.size()); ++i) {
        max_dw = std::max(max_dw, std::abs(a[i] - c[i]));
      }
    }
    if (ref.declared) {
      ++declared_count;
      wadd_sum += static_cast<double>(*ref.stop_slot - 1);
    } else {
      ++wadd_censored;
      wadd_sum += static_cast<double>(exp.horizon - 1);
    }
    const std::int64_t tx_ordered = want_ordered ? ordered[r].transmissions : 0;
    const std::int64_t tx_central =
        want_centralized ? centralized[r].transmissions
                         : static_cast<std::int64_t>(ordered[r].trajectory.size()) * k_count;
    outcomes.row(r, ref.declared, ref.stop_slot ? *ref.stop_slot : -1,
                 want_ordered ? tx_ordered : -1, tx_central,
                 want_ordered ? tx_central - tx_ordered : 0);
  }

  if (want_centralized) {
    CsvWriter traj((dir / "trajectory.csv").string());
    traj.row("n", "W_n", "transmissions", "declared");
    const auto& run = centralized[0];
    for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
      const std::int64_t n = static_cast<std::int64_t>(i) + 1;
      const bool declared_here =
          run.outcome.declared && run.outcome.stop_slot && *run.outcome.stop_slot == n;
      traj.row(n, run.trajectory[i], k_count, declared_here);
    }
  }
  if (want_ordered) {
    CsvWriter trace((dir / "savings_trace.csv").string());
    trace.row("n", "k_star", "saved", "W_n", "halted_early");
    const SavingsTrace& t0 = ordered[0].trace;
    for (std::size_t i = 0; i < t0.slot.size(); ++i) {
      trace.row(t0.slot[i], t0.k_star[i], t0.saved[i], t0.value[i], t0.halted_early[i] != 0);
    }
    if (config.per_slot) {
      CsvWriter all((dir / "savings_trace_all.csv").string());
      all.row("run", "n", "k_star", "saved", "W_n", "halted_early");
      for (int r = 0; r < exp.runs; ++r) {
        const SavingsTrace& t = ordered[r].trace;
        for (std::size_t i = 0; i < t.slot.size(); ++i) {
          all.row(r, t.slot[i], t.k_star[i], t.saved[i], t.value[i], t.halted_early[i] != 0);
        }
      }
    }
  }

  if (paired) {
    equivalent = equivalent && max_dw < 1e-9;
    std::cout << "equivalent: " << (equivalent ? "true" : "false")
              << " (max |dW| = " << format_double(max_dw) << ")\n";
  }
  std::cout << "declared runs: " << declared_count << "/" << exp.runs << "\n";
  if (exp.tau == 1 && std::isfinite(b)) {
    std::cout << "WADD estimate: " << format_double(wadd_sum / exp.runs);
    if (wadd_censored > 0) std::cout << " (" << wadd_censored << " runs censored)";
    std::cout << "\n";
  }
  std::cout << "wrote " << (dir / "outcomes.csv").string() << "\n";
  return kOk;
}

int cmd_sweep(const CommonOptions& opts) {
  ConfigFile config = load_with_overrides(opts);
  require_sections(config, true, true, true);
  config.experiment.validate();
  fs::path dir = prepare_output(config);

  std::vector<SweepRow> rows = sweep(config.experiment, *config.sweep_variable,
                                     config.sweep_values);

  CsvWriter csv((dir / "sweep.csv").string());
  csv.row("sweep_value", "total_saved", "lower_bound_empirical", "lower_bound_limit",
          "wadd", "calibrated_b");
  for (const auto& row : rows) {
    csv.field(row.value)
        .field(row.report.total_saved)
        .field(row.report.lower_bound_empirical)
        .field(row.report.lower_bound_limit)
        .field(row.report.wadd ? format_double(*row.report.wadd) : std::string{})
        .field(row.report.calibrated_b);
    csv.end_row();
    std::cout << "value " << format_double(row.value) << ": total_saved "
              << format_double(row.report.total_saved) << ", bound "
              << format_double(row.report.lower_bound_empirical) << ", b "
              << format_double(row.report.calibrated_b) << "\n";
    if (row.report.calibration_censor_warning) {
      std::cerr << "warning: value " << format_double(row.value) << ": "
                << row.report.calibration_censor_fraction * 100.0
                << "% of calibration runs censored\n";
    }
  }
  if (config.per_slot) {
    CsvWriter per_slot((dir / "per_slot.csv").string());
    per_slot.row("sweep_value", "n", "mean_saved");
    for (const auto& row : rows) {
      for (std::size_t n = 0; n < row.report.per_slot_saved.size(); ++n) {
        per_slot.row(row.value, static_cast<std::int64_t>(n) + 1,
                     row.report.per_slot_saved[n]);
      }
    }
  }
  std::cout << "wrote " << (dir / "sweep.csv").string() << "\n";
  return kOk;
}

int cmd_calibrate(const CommonOptions& opts) {
  ConfigFile config = load_with_overrides(opts);
  require_sections(config, true, true, false);
  ExperimentConfig exp = config.experiment;
  exp.b.reset();  // always calibrate, even if the config pins b
  exp.validate();
  StatisticEngine engine = make_engine(exp);
  auto cal = detail::calibrate(engine, exp.gamma, exp.runs, exp.master_seed);
  if (cal.censor_fraction > 0.01) {
    std::cerr << "warning: " << cal.censor_fraction * 100.0
              << "% of calibration runs were censored at the calibration horizon\n";
  }
  std::cout << "b = " << format_double(cal.b) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ordered-transmission CUSUM change detection on decomposable Gaussian "
               "graphical models"};
  app.require_subcommand(1);

  CommonOptions validate_opts, simulate_opts, sweep_opts, calibrate_opts;
  std::string mode = "paired";

  CLI::App* validate = app.add_subcommand("validate", "check a graph config, print its tables");
  add_common(validate, validate_opts);

  CLI::App* simulate = app.add_subcommand("simulate", "run paired detection simulations");
  add_common(simulate, simulate_opts);
  simulate->add_option("--mode", mode, "paired | ordered | centralized")
      ->check(CLI::IsMember({"paired", "ordered", "centralized"}));

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "run a savings sweep, emit CSV");
  add_common(sweep_cmd, sweep_opts);

  CLI::App* calibrate = app.add_subcommand("calibrate", "grid-search the threshold b");
  add_common(calibrate, calibrate_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return cmd_validate(validate_opts);
    if (simulate->parsed()) return cmd_simulate(simulate_opts, mode);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_opts);
    if (calibrate->parsed()) return cmd_calibrate(calibrate_opts);
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kParse;
  } catch (const CalibrationFailedError& e) {
    std::cerr << "calibration failed: " << e.what() << "\n";
    return kCalibration;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
  return kUnexpected;
}
