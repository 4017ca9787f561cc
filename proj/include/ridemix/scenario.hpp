#pragma once

#include "ridemix/instance_io.hpp"
#include "ridemix/model.hpp"
#include "ridemix/refine.hpp"

#include <string>
#include <vector>

namespace ridemix {

struct ScenarioConfig {
  EquilibriumConfig equilibrium;
  DualConfig dual;
  RefineConfig refine;
};

/// Configs with the overrides applied; the refiner shares the grid bounds.
ScenarioConfig make_scenario_config(const SolverOverrides& overrides, bool regulated);

struct ScenarioResult {
  SolveReport report;
  MarketMetrics metrics;
  double willing_drivers = 0.0;
  double mean_wait = 0.0;      // demand-weighted passenger wait, minutes
  double occupancy_av = 0.0;   // in-service share of AV hours
  double occupancy_human = 0.0;
  bool degenerate = false;     // instance had no potential demand
};

/// Full pipeline: relaxed bound via dual decomposition, then the refined
/// feasible solution and its metrics. An instance without any potential
/// demand short-circuits to the empty market.
ScenarioResult scenario_solve(const NetworkInstance& instance, const BehaviorParams& params, bool regulated,
                              const SolverOverrides& overrides = {});

struct CalibrationReport {
  double total_demand = 0.0;
  double mode_share = 0.0;
  double drivers = 0.0;
  double wage = 0.0;
  double mean_fare = 0.0;
  int rounds = 0;
  bool demand_ok = false;
  bool share_ok = false;
  double demand_target = 148.0;
  double share_target = 0.15;
  double lambda_scale = 1.0;   // cumulative potential-demand rescaling applied
  double cost_shift = 0.0;     // cumulative outside-cost offset applied
};

/// Scales the potential demand and shifts the outside costs until the no-AV
/// profit-maximizing equilibrium serves the target demand at the target mode
/// share. Mutates the instance in place.
CalibrationReport calibrate(NetworkInstance& instance, const BehaviorParams& params,
                            const SolverOverrides& overrides = {});

struct SweepSpec {
  enum class Variable { av_cost, min_wage };
  Variable variable = Variable::av_cost;
  double lo = 5.0, hi = 60.0, step = 1.0;
};

struct SweepPoint {
  double value = 0.0;
  ScenarioResult result;
  int wage_regime = 0;  // 1..4 for min-wage sweeps, 0 otherwise
};

struct RegimeReport {
  // AV-cost sweep: boundaries of the pure-AV / mixed / pure-human regimes.
  double av_cost_pure_av_max = quiet_nan();
  double av_cost_pure_human_min = quiet_nan();
  bool ordered = false;
  // Wage-floor sweep: first point of each constraint-activity regime.
  double wage_regime_start[5] = {quiet_nan(), quiet_nan(), quiet_nan(), quiet_nan(), quiet_nan()};
  double fleet_variation_below_replacement = quiet_nan();
};

struct SweepResult {
  SweepSpec spec;
  std::vector<SweepPoint> points;
  RegimeReport regimes;
};

/// Solves every point of the sweep, warm-starting the multiplier and the
/// refiner from the neighboring point, and classifies the regimes.
SweepResult sweep(const NetworkInstance& instance, const BehaviorParams& params, const SweepSpec& spec,
                  const SolverOverrides& overrides = {});

struct CheckReport {
  std::vector<std::pair<std::string, bool>> checks;
  bool pass() const;
};

/// Existence conditions, unit consistency, and the residual suite on one
/// solve; report-only.
CheckReport check_instance(const NetworkInstance& instance, const BehaviorParams& params,
                           const SolverOverrides& overrides = {});

// CSV emission. All files use '.' decimals and embed units in column names.
void write_solution_csv(const std::string& path, const NetworkInstance& instance, const ScenarioResult& result);
void write_summary_csv(const std::string& path, const ScenarioResult& result);
void write_sweep_csv(const std::string& path, const NetworkInstance& instance, const SweepResult& result);
void write_regime_csv(const std::string& path, const SweepResult& result);
void write_calibration_json(const std::string& path, const CalibrationReport& report);

}  // namespace ridemix
