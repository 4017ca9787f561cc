#include <CLI11.hpp>

#include "ridemix/generate.hpp"
#include "ridemix/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace ridemix;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitSolver = 3;

int run_generate(std::uint64_t seed, int zones, const std::string& out_dir) {
  const InstanceBundle bundle = generate_instance(seed, zones);
  write_instance_dir(out_dir, bundle.instance, bundle.params, bundle.overrides);
  std::cout << "wrote " << zones << "-zone instance to " << out_dir << "\n";
  return kExitOk;
}

int run_calibrate(const std::string& in_dir) {
  InstanceBundle bundle = read_instance_dir(in_dir);
  const CalibrationReport report = calibrate(bundle.instance, bundle.params, bundle.overrides);
  write_instance_dir(in_dir, bundle.instance, bundle.params, bundle.overrides);
  write_calibration_json((fs::path(in_dir) / "calibration_report.json").string(), report);
  std::cout << "calibrated in " << report.rounds << " rounds: demand " << report.total_demand
            << "/min (target " << report.demand_target << "), share " << report.mode_share << " (target "
            << report.share_target << ")\n"
            << "  drivers " << report.drivers << ", wage $" << report.wage << "/h, mean fare $"
            << report.mean_fare << "/ride\n";
  if (!report.demand_ok || !report.share_ok) {
    std::cerr << "calibration targets not reached; closest achievable values written\n";
    return kExitSolver;
  }
  return kExitOk;
}

int run_solve(const std::string& in_dir, const std::string& out_dir, bool regulated) {
  const InstanceBundle bundle = read_instance_dir(in_dir);
  if (regulated && !bundle.params.min_wage)
    throw DataError("params.json: --regulated requires the q_min key");
  const ScenarioResult result = scenario_solve(bundle.instance, bundle.params, regulated, bundle.overrides);
  if (!result.report.feasible) {
    std::cerr << "solve failed: " << result.report.failure << "\n";
    return kExitSolver;
  }
  fs::create_directories(out_dir);
  write_solution_csv((fs::path(out_dir) / "solution.csv").string(), bundle.instance, result);
  write_summary_csv((fs::path(out_dir) / "summary.csv").string(), result);
  std::cout << "profit " << result.report.profit << " $/min, upper bound " << result.report.upper_bound
            << " $/min, gap " << result.report.gap * 100.0 << "%\n"
            << "fleet: " << result.report.state.fleet_av << " AVs, " << result.report.state.fleet_human
            << " human drivers; demand " << result.metrics.total_demand << "/min\n";
  return kExitOk;
}

int run_sweep(const std::string& in_dir, const std::string& var, double lo, double hi, double step,
              const std::string& out_dir) {
  const InstanceBundle bundle = read_instance_dir(in_dir);
  SweepSpec spec;
  if (var == "D")
    spec.variable = SweepSpec::Variable::av_cost;
  else if (var == "q_min")
    spec.variable = SweepSpec::Variable::min_wage;
  else
    throw CLI::ValidationError("--var must be D or q_min");
  spec.lo = lo;
  spec.hi = hi;
  spec.step = step;
  const SweepResult result = sweep(bundle.instance, bundle.params, spec, bundle.overrides);
  fs::create_directories(out_dir);
  write_sweep_csv((fs::path(out_dir) / "sweep.csv").string(), bundle.instance, result);
  write_regime_csv((fs::path(out_dir) / "regimes.csv").string(), result);
  int failures = 0;
  for (const auto& pt : result.points)
    if (!pt.result.report.feasible) ++failures;
  std::cout << result.points.size() << " points solved (" << failures << " failures) -> " << out_dir << "\n";
  return kExitOk;
}

int run_check(const std::string& in_dir) {
  const InstanceBundle bundle = read_instance_dir(in_dir);
  const CheckReport report = check_instance(bundle.instance, bundle.params, bundle.overrides);
  for (const auto& [name, ok] : report.checks)
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << "\n";
  return report.pass() ? kExitOk : kExitData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial equilibrium solver for a ride-sourcing market with a mixed AV / human-driver fleet"};
  app.require_subcommand(1);

  std::uint64_t seed = 0;
  int zones = 19;
  std::string in_dir, out_dir, var;
  double lo = 5.0, hi = 60.0, step = 1.0;
  bool regulated = false;

  CLI::App* generate_cmd = app.add_subcommand("generate", "Write a seeded synthetic instance");
  generate_cmd->add_option("--seed", seed, "RNG seed")->required();
  generate_cmd->add_option("--zones", zones, "zone count (default 19)");
  generate_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* calibrate_cmd = app.add_subcommand("calibrate", "Calibrate an instance to the target aggregates");
  calibrate_cmd->add_option("--in", in_dir, "instance directory (updated in place)")->required();

  CLI::App* solve_cmd = app.add_subcommand("solve", "Solve the pricing problem and write reports");
  solve_cmd->add_option("--in", in_dir, "instance directory")->required();
  solve_cmd->add_option("--out", out_dir, "output directory")->required();
  solve_cmd->add_flag("--regulated", regulated, "enforce the q_min wage floor from params.json");

  CLI::App* sweep_cmd = app.add_subcommand("sweep", "Solve across a parameter range");
  sweep_cmd->add_option("--in", in_dir, "instance directory")->required();
  sweep_cmd->add_option("--var", var, "swept variable: D or q_min")->required();
  sweep_cmd->add_option("--lo", lo, "range start ($/hour)")->required();
  sweep_cmd->add_option("--hi", hi, "range end ($/hour)")->required();
  sweep_cmd->add_option("--step", step, "step ($/hour)")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory")->required();

  CLI::App* check_cmd = app.add_subcommand("check", "Validate an instance and one solve");
  check_cmd->add_option("--in", in_dir, "instance directory")->required();

  try {
    app.parse(argc, argv);
    if (generate_cmd->parsed()) return run_generate(seed, zones, out_dir);
    if (calibrate_cmd->parsed()) return run_calibrate(in_dir);
    if (solve_cmd->parsed()) return run_solve(in_dir, out_dir, regulated);
    if (sweep_cmd->parsed()) return run_sweep(in_dir, var, lo, hi, step, out_dir);
    if (check_cmd->parsed()) return run_check(in_dir);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kExitOk : kExitUsage;
  } catch (const DataError& err) {
    std::cerr << "data error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& err) {
    std::cerr << "configuration error: " << err.what() << "\n";
    return kExitData;
  } catch (const SolverError& err) {
    std::cerr << "solver error: " << err.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitSolver;
  }
  return kExitUsage;
}
