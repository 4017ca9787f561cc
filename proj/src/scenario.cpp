#include "ridemix/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace ridemix {

namespace {

constexpr double kZeroFleet = 0.1;        // vehicles; grid search never returns exact zero
constexpr double kReplacedShare = 0.01;   // human share of the fleet counting as full replacement
constexpr double kFloorActiveTol = 0.05;  // $/hour slack for "wage at the floor"
constexpr double kSupplyBindingShare = 0.99;

struct WarmStart {
  std::optional<double> mu0;
  std::optional<PlatformDecision> decision;
};

ScenarioResult solve_impl(const NetworkInstance& instance, const BehaviorParams& params, bool regulated,
                          const SolverOverrides& overrides, const WarmStart* warm) {
  instance.validate();
  params.validate();
  ScenarioResult out;

  if (instance.potential_demand.sum() <= 0.0) {
    // No market to serve: report the shut-down platform instead of forcing
    // the supply model through a degenerate equilibrium.
    const int m = instance.size();
    out.degenerate = true;
    ScenarioConfig config = make_scenario_config(overrides, regulated);
    out.report.decision.wage = config.dual.grid.wage_lo;
    out.report.decision.fare = Vec::Constant(m, config.dual.grid.fare_lo);
    out.report.decision.idle_av = Vec::Zero(m);
    out.report.decision.hire_fraction = regulated ? 0.0 : 1.0;
    out.report.state.demand = Mat::Zero(m, m);
    out.report.state.idle_human = Vec::Zero(m);
    out.report.state.idle_total = Vec::Zero(m);
    out.report.state.wait_passenger = Vec::Constant(m, infinity());
    out.report.state.wait_vehicle = Vec::Constant(m, infinity());
    out.report.state.flow_human = Mat::Zero(m, m);
    out.report.state.flow_av = Mat::Zero(m, m);
    out.report.state.mean_trip_time = Vec::Constant(m, quiet_nan());
    out.report.state.mean_earning = Vec::Constant(m, quiet_nan());
    out.report.state.reposition_prob = Mat::Constant(m, m, 1.0 / m);
    out.report.feasible = true;
    out.metrics.zone_fare = out.report.decision.fare;
    out.metrics.zone_wait_passenger = out.report.state.wait_passenger;
    out.metrics.zone_wait_vehicle = out.report.state.wait_vehicle;
    out.metrics.zone_idle_av = Vec::Zero(m);
    out.metrics.zone_idle_human = Vec::Zero(m);
    out.metrics.zone_human_share = Vec::Zero(m);
    return out;
  }

  ScenarioConfig config = make_scenario_config(overrides, regulated);
  if (warm && warm->mu0) config.dual.mu0 = *warm->mu0;
  if (warm && warm->decision) config.refine.initial_override = warm->decision;

  const RelaxedSolution relaxed = run_dual(instance, params, config.dual, regulated);
  out.report = refine(instance, params, relaxed, config.refine);
  if (!out.report.feasible) return out;

  out.metrics = market_metrics(instance, params, out.report.decision, out.report.state);
  out.willing_drivers = driver_supply(params.driver_pool, out.report.decision.wage, params.reservation_wage,
                                      params.supply_sensitivity);
  const MarketState& st = out.report.state;
  const double demand = st.demand.sum();
  if (demand > 0.0) {
    double weighted = 0.0;
    for (int i = 0; i < instance.size(); ++i) weighted += st.demand.row(i).sum() * st.wait_passenger(i);
    out.mean_wait = weighted / demand;
  }
  const VehicleHours hours = vehicle_hours(st.demand, instance.travel_time, st.wait_passenger, st.idle_human,
                                           out.report.decision.idle_av);
  out.occupancy_av = hours.av > 0.0 ? hours.in_service_av / hours.av : 0.0;
  out.occupancy_human = hours.human > 0.0 ? hours.in_service_human / hours.human : 0.0;
  return out;
}

}  // namespace

ScenarioConfig make_scenario_config(const SolverOverrides& overrides, bool regulated) {
  ScenarioConfig config;
  config.equilibrium.max_outer_iters = 2000;  // cold starts need headroom
  overrides.apply(config.equilibrium);
  overrides.apply(config.dual);
  overrides.apply(config.refine);
  config.refine.regulated = regulated;
  config.refine.equilibrium = config.equilibrium;
  return config;
}

ScenarioResult scenario_solve(const NetworkInstance& instance, const BehaviorParams& params, bool regulated,
                              const SolverOverrides& overrides) {
  return solve_impl(instance, params, regulated, overrides, nullptr);
}

CalibrationReport calibrate(NetworkInstance& instance, const BehaviorParams& params,
                            const SolverOverrides& overrides) {
  BehaviorParams no_av = params;
  no_av.av_cost = 1e6;  // prohibitive: the calibration equilibrium has no AVs
  no_av.min_wage.reset();

  CalibrationReport rep;
  const double demand_tol = 0.02 * rep.demand_target;
  const double share_tol = 0.01;
  EquilibriumConfig eq;
  overrides.apply(eq);

  // Pin the total potential demand so that hitting the share target lands the
  // served demand on its target as well; the remaining knob is a uniform
  // outside-cost shift driving the share.
  const double total_target = rep.demand_target / rep.share_target;
  if (instance.potential_demand.sum() > 0.0) {
    const double scale = total_target / instance.potential_demand.sum();
    instance.potential_demand *= scale;
    rep.lambda_scale *= scale;
  }

  for (int round = 0; round < 10; ++round) {
    rep.rounds = round + 1;
    const ScenarioResult solved = solve_impl(instance, no_av, false, overrides, nullptr);
    if (!solved.report.feasible) throw SolverError("calibration solve failed: " + solved.report.failure);
    rep.total_demand = solved.metrics.total_demand;
    rep.mode_share = solved.metrics.total_demand / instance.potential_demand.sum();
    rep.drivers = solved.report.state.fleet_human;
    rep.wage = solved.report.decision.wage;
    rep.mean_fare = solved.metrics.mean_fare;
    rep.demand_ok = std::abs(rep.total_demand - rep.demand_target) <= demand_tol;
    rep.share_ok = std::abs(rep.mode_share - rep.share_target) <= share_tol;
    if (rep.demand_ok && rep.share_ok) break;

    // Shift the outside-option cost until the mode share at the frozen
    // decision hits the target; the share rises with the shift.
    const PlatformDecision decision = solved.report.decision;
    const Vec warm = solved.report.state.idle_human;
    double lo = -40.0, hi = 40.0;
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      NetworkInstance trial = instance;
      trial.outside_cost.array() += mid;
      trial.outside_cost = trial.outside_cost.cwiseMax(0.0);
      EquilibriumConfig warm_eq = eq;
      warm_eq.warm_start = warm;
      const EquilibriumResult res = solve_market(trial, no_av, decision, warm_eq);
      if (!res.converged) throw SolverError("calibration equilibrium did not settle");
      const double share = res.state.demand.sum() / trial.potential_demand.sum();
      (share < rep.share_target ? lo : hi) = mid;
    }
    const double shift = 0.5 * (lo + hi);
    instance.outside_cost.array() += shift;
    instance.outside_cost = instance.outside_cost.cwiseMax(0.0);
    rep.cost_shift += shift;
  }
  return rep;
}

SweepResult sweep(const NetworkInstance& instance, const BehaviorParams& params, const SweepSpec& spec,
                  const SolverOverrides& overrides) {
  if (!(spec.lo < spec.hi) || !(spec.step > 0.0)) throw std::invalid_argument("sweep range must be ordered");
  SweepResult out;
  out.spec = spec;

  std::vector<double> values;
  for (double v = spec.lo; v < spec.hi + 0.5 * spec.step; v += spec.step) values.push_back(std::min(v, spec.hi));

  WarmStart warm;
  for (const double v : values) {
    BehaviorParams p = params;
    bool regulated = false;
    if (spec.variable == SweepSpec::Variable::av_cost) {
      p.av_cost = v;
    } else {
      p.min_wage = v;
      regulated = true;
    }
    SweepPoint point;
    point.value = v;
    point.result = solve_impl(instance, p, regulated, overrides, &warm);
    if (point.result.report.feasible) {
      warm.mu0 = point.result.report.relaxed.mu_best;
      warm.decision = point.result.report.decision;
    }
    out.points.push_back(std::move(point));
  }

  ScenarioConfig config = make_scenario_config(overrides, false);
  const double floor_supply = driver_supply(params.driver_pool, config.dual.grid.wage_lo,
                                            params.reservation_wage, params.supply_sensitivity);

  if (spec.variable == SweepSpec::Variable::av_cost) {
    // The supply logit never reaches zero at any wage, so "no human drivers"
    // means the wage sits at the grid floor with no hiring beyond its tail.
    std::vector<int> labels;
    for (auto& pt : out.points) {
      if (!pt.result.report.feasible) {
        labels.push_back(1);
        continue;
      }
      const double n_h = pt.result.report.state.fleet_human;
      const double n_a = pt.result.report.state.fleet_av;
      const bool pure_av = n_h <= floor_supply * (1.0 + 1e-6) + kZeroFleet;
      const bool pure_human = n_a <= kZeroFleet;
      labels.push_back(pure_av ? 0 : (pure_human ? 2 : 1));
      if (pure_av)
        out.regimes.av_cost_pure_av_max = std::isnan(out.regimes.av_cost_pure_av_max)
                                              ? pt.value
                                              : std::max(out.regimes.av_cost_pure_av_max, pt.value);
      if (pure_human)
        out.regimes.av_cost_pure_human_min = std::isnan(out.regimes.av_cost_pure_human_min)
                                                 ? pt.value
                                                 : std::min(out.regimes.av_cost_pure_human_min, pt.value);
    }
    out.regimes.ordered = std::is_sorted(labels.begin(), labels.end()) &&
                          labels.front() == 0 && labels.back() == 2 &&
                          std::count(labels.begin(), labels.end(), 1) > 0;
  } else {
    double fleet_min = infinity(), fleet_max = -infinity();
    for (auto& pt : out.points) {
      if (!pt.result.report.feasible) continue;
      const double n_h = pt.result.report.state.fleet_human;
      const double n_a = pt.result.report.state.fleet_av;
      const double wage = pt.result.report.decision.wage;
      const double willing = pt.result.willing_drivers;
      const bool floor_active = wage <= pt.value + kFloorActiveTol;
      const bool supply_binding = n_h >= kSupplyBindingShare * willing;
      const bool replaced = n_h <= std::max(kZeroFleet, kReplacedShare * (n_h + n_a));
      int regime;
      if (replaced)
        regime = 4;
      else if (!floor_active)
        regime = 1;
      else if (supply_binding)
        regime = 2;
      else
        regime = 3;
      pt.wage_regime = regime;
      if (std::isnan(out.regimes.wage_regime_start[regime])) out.regimes.wage_regime_start[regime] = pt.value;
      if (regime < 4) {
        fleet_min = std::min(fleet_min, n_h + n_a);
        fleet_max = std::max(fleet_max, n_h + n_a);
      }
    }
    if (std::isfinite(fleet_min) && fleet_max > 0.0)
      out.regimes.fleet_variation_below_replacement = (fleet_max - fleet_min) / fleet_max;
  }
  return out;
}

bool CheckReport::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.second; });
}

CheckReport check_instance(const NetworkInstance& instance, const BehaviorParams& params,
                           const SolverOverrides& overrides) {
  CheckReport report;
  auto add = [&](const std::string& name, bool ok) { report.checks.emplace_back(name, ok); };

  bool params_ok = true;
  try {
    params.validate();
    instance.validate();
  } catch (const std::exception&) {
    params_ok = false;
  }
  add("inputs valid", params_ok);
  if (!params_ok) return report;

  // Hour <-> minute conversions must round-trip exactly at double precision.
  bool units_ok = true;
  for (const double v : {params.reservation_wage, params.av_cost, 1.0, 3600.0, 1e-3}) {
    const double back = per_minute_to_hourly(hourly_to_per_minute(v));
    if (std::abs(back - v) > std::ldexp(std::abs(v), -50)) units_ok = false;
  }
  add("unit round-trip exact", units_ok);

  ScenarioConfig config = make_scenario_config(overrides, params.min_wage.has_value());
  add("wage floor within the wage grid",
      !params.min_wage || *params.min_wage <= config.dual.grid.wage_hi);
  if (!report.pass()) return report;

  bool solve_ok = false, residual_ok = false, existence_ok = false;
  try {
    const ScenarioResult res = scenario_solve(instance, params, params.min_wage.has_value(), overrides);
    solve_ok = res.report.feasible;
    if (solve_ok && !res.degenerate) {
      const ResidualReport rr = residual_report(instance, params, res.report.decision, res.report.state);
      residual_ok = rr.max() <= 1e-6;
      const ExistenceReport er = check_existence_conditions(instance, params, res.report.decision);
      existence_ok = !er.any_fail();
    } else if (res.degenerate) {
      residual_ok = true;
      existence_ok = true;
    }
  } catch (const std::exception&) {
    solve_ok = false;
  }
  add("solve completes", solve_ok);
  add("equilibrium residuals within 1e-6", residual_ok);
  add("existence conditions hold", existence_ok);
  return report;
}

namespace {

std::string csv_cell(double v) { return format_double(v); }

}  // namespace

void write_solution_csv(const std::string& path, const NetworkInstance& instance, const ScenarioResult& result) {
  std::ofstream out(path);
  out << "zone_id,fare_per_min,idle_av_vehicles,idle_human_vehicles,wait_passenger_min,wait_vehicle_min,"
         "human_share\n";
  const MarketState& st = result.report.state;
  const Vec share = st.idle_total.size() ? st.human_share() : Vec();
  for (int i = 0; i < instance.size(); ++i) {
    out << instance.zones[i].zone_id << ',' << csv_cell(result.report.decision.fare(i)) << ','
        << csv_cell(result.report.decision.idle_av(i)) << ',' << csv_cell(st.idle_human(i)) << ','
        << csv_cell(st.wait_passenger(i)) << ',' << csv_cell(st.wait_vehicle(i)) << ','
        << csv_cell(share.size() ? share(i) : 0.0) << '\n';
  }
}

void write_summary_csv(const std::string& path, const ScenarioResult& result) {
  std::ofstream out(path);
  out << "profit_per_min,upper_bound_per_min,gap,n_av_vehicles,n_human_vehicles,demand_per_min,"
         "wage_per_hour,mean_fare_per_ride,mean_wait_min,passenger_surplus_per_min,driver_surplus_per_min,"
         "social_welfare_per_min\n";
  out << csv_cell(result.report.profit) << ',' << csv_cell(result.report.upper_bound) << ','
      << csv_cell(result.report.gap) << ',' << csv_cell(result.report.state.fleet_av) << ','
      << csv_cell(result.report.state.fleet_human) << ',' << csv_cell(result.metrics.total_demand) << ','
      << csv_cell(result.report.decision.wage) << ',' << csv_cell(result.metrics.mean_fare) << ','
      << csv_cell(result.mean_wait) << ',' << csv_cell(result.metrics.passenger_surplus) << ','
      << csv_cell(result.metrics.driver_surplus) << ',' << csv_cell(result.metrics.social_welfare) << '\n';
}

void write_sweep_csv(const std::string& path, const NetworkInstance& instance, const SweepResult& result) {
  std::ofstream out(path);
  out << "variable,value,profit_per_min,upper_bound_per_min,gap,n_av_vehicles,n_human_vehicles,"
         "willing_drivers,wage_per_hour,mean_fare_per_ride,mean_wait_min,demand_per_min,occupancy_av,"
         "occupancy_human,social_welfare_per_min,wage_regime";
  for (const auto& z : instance.zones) out << ",idle_av_" << z.zone_id;
  for (const auto& z : instance.zones) out << ",idle_human_" << z.zone_id;
  for (const auto& z : instance.zones) out << ",wait_passenger_" << z.zone_id;
  for (const auto& z : instance.zones) out << ",wait_vehicle_" << z.zone_id;
  for (const auto& z : instance.zones) out << ",human_share_" << z.zone_id;
  for (const auto& z : instance.zones) out << ",fare_" << z.zone_id;
  out << '\n';
  const char* var = result.spec.variable == SweepSpec::Variable::av_cost ? "D" : "q_min";
  for (const auto& pt : result.points) {
    const ScenarioResult& r = pt.result;
    out << var << ',' << csv_cell(pt.value) << ',' << csv_cell(r.report.profit) << ','
        << csv_cell(r.report.upper_bound) << ',' << csv_cell(r.report.gap) << ','
        << csv_cell(r.report.state.fleet_av) << ',' << csv_cell(r.report.state.fleet_human) << ','
        << csv_cell(r.willing_drivers) << ',' << csv_cell(r.report.decision.wage) << ','
        << csv_cell(r.metrics.mean_fare) << ',' << csv_cell(r.mean_wait) << ','
        << csv_cell(r.metrics.total_demand) << ',' << csv_cell(r.occupancy_av) << ','
        << csv_cell(r.occupancy_human) << ',' << csv_cell(r.metrics.social_welfare) << ',' << pt.wage_regime;
    const MarketState& st = r.report.state;
    const Vec share = st.human_share();
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(r.report.decision.idle_av(i));
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(st.idle_human(i));
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(st.wait_passenger(i));
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(st.wait_vehicle(i));
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(share(i));
    for (int i = 0; i < instance.size(); ++i) out << ',' << csv_cell(r.report.decision.fare(i));
    out << '\n';
  }
}

void write_regime_csv(const std::string& path, const SweepResult& result) {
  std::ofstream out(path);
  if (result.spec.variable == SweepSpec::Variable::av_cost) {
    out << "pure_av_max_cost,pure_human_min_cost,ordered\n";
    out << csv_cell(result.regimes.av_cost_pure_av_max) << ','
        << csv_cell(result.regimes.av_cost_pure_human_min) << ',' << (result.regimes.ordered ? 1 : 0) << '\n';
  } else {
    out << "regime1_start,regime2_start,regime3_start,regime4_start,fleet_variation_below_replacement\n";
    out << csv_cell(result.regimes.wage_regime_start[1]) << ',' << csv_cell(result.regimes.wage_regime_start[2])
        << ',' << csv_cell(result.regimes.wage_regime_start[3]) << ','
        << csv_cell(result.regimes.wage_regime_start[4]) << ','
        << csv_cell(result.regimes.fleet_variation_below_replacement) << '\n';
  }
}

void write_calibration_json(const std::string& path, const CalibrationReport& report) {
  nlohmann::ordered_json doc;
  doc["total_demand_per_min"] = report.total_demand;
  doc["mode_share"] = report.mode_share;
  doc["drivers"] = report.drivers;
  doc["wage_per_hour"] = report.wage;
  doc["mean_fare_per_ride"] = report.mean_fare;
  doc["rounds"] = report.rounds;
  doc["demand_ok"] = report.demand_ok;
  doc["share_ok"] = report.share_ok;
  doc["demand_target_per_min"] = report.demand_target;
  doc["share_target"] = report.share_target;
  doc["lambda_scale"] = report.lambda_scale;
  doc["cost_shift"] = report.cost_shift;
  doc["reference_drivers"] = 3703.0;
  doc["reference_wage_per_hour"] = 26.2;
  doc["reference_mean_fare_per_ride"] = 20.5;
  std::ofstream out(path);
  out << doc.dump(2) << '\n';
}

}  // namespace ridemix
