#include "ridemix/equilibrium.hpp"

#include "ridemix/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ridemix {

double hire_budget(const BehaviorParams& params, const PlatformDecision& decision) {
  return decision.hire_fraction *
         driver_supply(params.driver_pool, decision.wage, params.reservation_wage, params.supply_sensitivity);
}

namespace {

// Every endogenous quantity induced by an idle-human vector (clamped at 0).
struct Snapshot {
  Vec idle_h;
  Vec idle_total;
  Vec wait_p;   // inf where a zone has no idle vehicles
  Mat lambda;
  Vec outbound;
  Vec wait_d;   // inf where a zone has no outbound demand
  Vec share;
  double revenue = 0.0;
  double gamma = 0.0;        // human in-service + pickup hours
  double human_hours = 0.0;  // gamma + idle
  double delta = 0.0;
  bool delta_negative = false;
  TripStats stats;
  Mat prob;
  Mat flow_h;
  Vec inbound;  // repositioning inflow per zone
};

Snapshot make_snapshot(const NetworkInstance& inst, const BehaviorParams& p, const PlatformDecision& d,
                       const Vec& idle_h_raw) {
  const int m = inst.size();
  Snapshot s;
  s.idle_h = idle_h_raw.cwiseMax(0.0);
  s.idle_total = s.idle_h + d.idle_av;
  s.wait_p = Vec::Constant(m, infinity());
  s.lambda = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    if (s.idle_total(i) <= 0.0) continue;
    s.wait_p(i) = passenger_wait(p.wait_coefficient, s.idle_total(i));
    for (int j = 0; j < m; ++j) {
      const double cost = generalized_cost(p.value_of_time, s.wait_p(i), d.fare(i), inst.travel_time(i, j));
      s.lambda(i, j) = demand_rate(inst.potential_demand(i, j), cost, inst.outside_cost(i, j), p.demand_sensitivity);
    }
  }
  s.outbound = s.lambda.rowwise().sum();
  s.wait_d = Vec::Constant(m, infinity());
  s.share = Vec::Zero(m);
  for (int i = 0; i < m; ++i) {
    if (s.outbound(i) > 0.0) s.wait_d(i) = s.idle_total(i) / s.outbound(i);
    if (s.idle_total(i) > 0.0) s.share(i) = s.idle_h(i) / s.idle_total(i);
  }
  for (int i = 0; i < m; ++i) {
    const double service = s.lambda.row(i).dot(inst.travel_time.row(i));
    s.revenue += d.fare(i) * service;
    const double pickup = s.outbound(i) > 0.0 ? s.outbound(i) * s.wait_p(i) : 0.0;
    s.gamma += s.share(i) * (service + pickup);
  }
  s.human_hours = s.gamma + s.idle_h.sum();
  if (s.revenue > 0.0) {
    const CommissionResult c = commission_from_wage(d.wage, s.human_hours, s.revenue);
    s.delta = c.rate;
    s.delta_negative = c.negative;
  }
  s.stats = trip_stats(s.lambda, inst.travel_time, d.fare, s.delta);
  s.prob = reposition_probabilities(s.stats.mean_earning, s.stats.mean_time, s.wait_d, inst.travel_time,
                                    p.reposition_sensitivity);
  s.flow_h = human_reposition_flow(s.prob, s.lambda, s.idle_h, d.idle_av);
  s.inbound = s.flow_h.colwise().sum().transpose();
  return s;
}

double snapshot_residual(const Snapshot& s, double budget) {
  double res = std::abs(budget - s.human_hours) / std::max(budget, 1.0);
  for (int i = 0; i < s.share.size(); ++i) {
    const double served = s.share(i) * s.outbound(i);
    const double denom = std::max({s.inbound(i), served, 1e-9 * std::max(budget, 1.0)});
    res = std::max(res, std::abs(s.inbound(i) - served) / denom);
  }
  return res;
}

MarketState state_from_snapshot(const Snapshot& s, int m) {
  MarketState st;
  st.demand = s.lambda;
  st.wait_passenger = s.wait_p;
  st.wait_vehicle = s.wait_d;
  st.idle_human = s.idle_h;
  st.idle_total = s.idle_total;
  st.flow_human = s.flow_h;
  st.flow_av = Mat::Zero(m, m);
  st.commission = s.delta;
  st.commission_negative = s.delta_negative;
  st.mean_trip_time = s.stats.mean_time;
  st.mean_earning = s.stats.mean_earning;
  st.reposition_prob = s.prob;
  st.fleet_human = s.human_hours;
  st.fleet_av = 0.0;
  return st;
}

Vec initial_iterate(const NetworkInstance& inst, double budget) {
  Vec weights = inst.potential_demand.rowwise().sum();
  if (weights.sum() <= 0.0) weights = Vec::Ones(inst.size());
  return 0.5 * budget * weights / weights.sum();
}

}  // namespace

double solve_idle_scalar(int zone, double inbound_flow_target, const NetworkInstance& instance,
                         const BehaviorParams& params, const PlatformDecision& decision, double supply_budget,
                         double bisect_tol) {
  if (inbound_flow_target <= 0.0) return 0.0;
  const int m = instance.size();
  const double idle_av = decision.idle_av(zone);
  const auto served = [&](double x) -> double {
    if (x <= 0.0) return 0.0;
    const double wait = passenger_wait(params.wait_coefficient, x + idle_av);
    double outflow = 0.0;
    for (int j = 0; j < m; ++j) {
      const double cost =
          generalized_cost(params.value_of_time, wait, decision.fare(zone), instance.travel_time(zone, j));
      outflow += demand_rate(instance.potential_demand(zone, j), cost, instance.outside_cost(zone, j),
                             params.demand_sensitivity);
    }
    return x / (idle_av + x) * outflow;
  };

  if (served(supply_budget) < inbound_flow_target)
    throw InfeasibleTargetError("zone " + std::to_string(zone) +
                                ": repositioning inflow exceeds the zone's serving capacity at full supply");
  double lo = 0.0, hi = supply_budget;
  for (int it = 0; it < 200 && hi - lo > bisect_tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    (served(mid) < inbound_flow_target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ExistenceReport check_existence_conditions(const NetworkInstance& instance, const BehaviorParams& params,
                                           const PlatformDecision& decision) {
  const int m = instance.size();
  const double budget = hire_budget(params, decision);
  ExistenceReport report;
  report.concentration.resize(m);
  report.inflow = Vec::Zero(m);
  report.outflow = Vec::Zero(m);
  const double tiny = 1e-12 * (1.0 + instance.potential_demand.sum());
  for (int i = 0; i < m; ++i) {
    Vec concentrated = Vec::Zero(m);
    concentrated(i) = budget;
    const Snapshot s = make_snapshot(instance, params, decision, concentrated);
    // Everybody dropping off in the crowded zone repositions out of it; the
    // zone must be able to serve at least that flow.
    report.inflow(i) = s.share(i) * s.lambda.col(i).sum();
    report.outflow(i) = s.share(i) * s.outbound(i);
    if (report.inflow(i) <= tiny && report.outflow(i) <= tiny)
      report.concentration[i] = ExistenceReport::ZoneStatus::boundary;
    else if (report.outflow(i) >= report.inflow(i))
      report.concentration[i] = ExistenceReport::ZoneStatus::pass;
    else
      report.concentration[i] = ExistenceReport::ZoneStatus::fail;
  }
  return report;
}

bool ExistenceReport::all_pass() const {
  return std::all_of(concentration.begin(), concentration.end(),
                     [](ZoneStatus s) { return s == ZoneStatus::pass; });
}

bool ExistenceReport::any_fail() const {
  return std::any_of(concentration.begin(), concentration.end(),
                     [](ZoneStatus s) { return s == ZoneStatus::fail; });
}

EquilibriumResult equilibrium_fixed_point(const NetworkInstance& instance, const BehaviorParams& params,
                                          const PlatformDecision& decision, const EquilibriumConfig& config) {
  const int m = instance.size();
  instance.validate();
  params.validate();
  decision.validate(m);

  EquilibriumResult result;
  if (config.check_existence) {
    result.existence = check_existence_conditions(instance, params, decision);
    if (result.existence.any_fail()) {
      result.failure = "existence condition fails: a zone cannot absorb its repositioning inflow";
      result.state = state_from_snapshot(make_snapshot(instance, params, decision, Vec::Zero(m)), m);
      return result;
    }
  }

  const double budget = hire_budget(params, decision);
  Vec x = config.warm_start && config.warm_start->size() == m ? *config.warm_start
                                                              : initial_iterate(instance, budget);
  // Zone absorbing the driver-hours budget slack; the biggest market gives
  // the correction the most room.
  int budget_zone = 0;
  instance.potential_demand.rowwise().sum().maxCoeff(&budget_zone);

  double theta = config.damping;
  double prev_residual = infinity();
  int rises = 0, falls = 0;
  bool clamped = false;
  // The plain map corrects budget violations through one zone only, which
  // can stall far from the fixed point; after a stall the iteration switches
  // to a globally rescaled variant with the same fixed points.
  bool rescaled_phase = false;

  auto flow_root = [&](int i, double target) -> double {
    try {
      return solve_idle_scalar(i, target, instance, params, decision, budget, config.bisect_tol);
    } catch (const InfeasibleTargetError&) {
      // Transient iterates may overshoot a zone's serving capacity even when
      // the equilibrium exists; cap at the budget and keep iterating.
      clamped = true;
      return budget;
    }
  };

  Snapshot snap = make_snapshot(instance, params, decision, x);
  for (int k = 0; k < config.max_outer_iters; ++k) {
    const double residual = snapshot_residual(snap, budget);
    result.residual_history.push_back(residual);
    result.iterations = k;
    result.max_residual = residual;
    if (residual <= config.fp_tol) {
      result.converged = true;
      break;
    }
    // Safeguarded step control: back off after repeated rises, speed up on a
    // long monotone descent.
    if (residual > prev_residual) {
      falls = 0;
      if (++rises >= 2) {
        theta = std::max(0.5 * theta, 1.0 / 64.0);
        rises = 0;
      }
    } else {
      rises = 0;
      if (++falls >= 8) {
        theta = std::min(1.0, 1.3 * theta);
        falls = 0;
      }
    }
    prev_residual = residual;
    const auto& hist = result.residual_history;
    if (!rescaled_phase && k >= 30 && hist[k] > 0.1 * hist[k - 30]) rescaled_phase = true;

    Vec mapped(m);
    clamped = false;
    if (!rescaled_phase) {
      mapped(budget_zone) = budget - snap.gamma - (snap.idle_h.sum() - snap.idle_h(budget_zone));
      for (int i = 0; i < m; ++i)
        if (i != budget_zone) mapped(i) = flow_root(i, snap.inbound(i));
    } else {
      Vec roots(m);
      for (int i = 0; i < m; ++i) roots(i) = flow_root(i, snap.inbound(i));
      const double idle_target = std::max(0.0, budget - snap.gamma);
      if (roots.sum() > 0.0) {
        mapped = (roots * (idle_target / roots.sum())).cwiseMin(budget);
      } else {
        mapped = initial_iterate(instance, 2.0 * idle_target);
      }
    }
    x = (1.0 - theta) * x + theta * mapped;
    snap = make_snapshot(instance, params, decision, x);
  }

  result.state = state_from_snapshot(snap, m);
  if (!result.converged) {
    if (x(budget_zone) < 0.0)
      result.failure = "wage budget cannot absorb the required idle hours (negative budget zone)";
    else if (clamped)
      result.failure = "repositioning inflow exceeds a zone's serving capacity at full supply";
    else
      result.failure = "fixed point did not converge within the iteration limit";
  }
  return result;
}

Mat min_cost_transport(const Vec& supply, const Vec& demand, const Mat& cost) {
  const int m = static_cast<int>(supply.size());
  struct Arc {
    int to;
    double cap;
    double cost;
    int rev;
  };
  std::vector<std::vector<Arc>> graph(2 * m + 2);
  const int src = 2 * m, dst = 2 * m + 1;
  auto add_arc = [&](int a, int b, double cap, double c) {
    graph[a].push_back({b, cap, c, static_cast<int>(graph[b].size())});
    graph[b].push_back({a, 0.0, -c, static_cast<int>(graph[a].size()) - 1});
  };
  double total = 0.0;
  for (int i = 0; i < m; ++i) {
    if (supply(i) > 0.0) {
      add_arc(src, i, supply(i), 0.0);
      total += supply(i);
    }
    if (demand(i) > 0.0) add_arc(m + i, dst, demand(i), 0.0);
  }
  for (int i = 0; i < m; ++i) {
    if (supply(i) <= 0.0) continue;
    for (int j = 0; j < m; ++j)
      if (demand(j) > 0.0) add_arc(i, m + j, infinity(), cost(i, j));
  }

  const double dust = 1e-13 * (1.0 + total);
  double shipped = 0.0;
  while (total - shipped > dust) {
    // Bellman-Ford shortest augmenting path (residual costs can be negative).
    const int n = 2 * m + 2;
    std::vector<double> dist(n, infinity());
    std::vector<int> prev_node(n, -1), prev_arc(n, -1);
    dist[src] = 0.0;
    for (int round = 0; round < n; ++round) {
      bool changed = false;
      for (int u = 0; u < n; ++u) {
        if (!std::isfinite(dist[u])) continue;
        for (int a = 0; a < static_cast<int>(graph[u].size()); ++a) {
          const Arc& arc = graph[u][a];
          if (arc.cap <= dust) continue;
          if (dist[u] + arc.cost < dist[arc.to] - 1e-15) {
            dist[arc.to] = dist[u] + arc.cost;
            prev_node[arc.to] = u;
            prev_arc[arc.to] = a;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    if (!std::isfinite(dist[dst])) break;
    double push = total - shipped;
    for (int v = dst; v != src; v = prev_node[v]) push = std::min(push, graph[prev_node[v]][prev_arc[v]].cap);
    for (int v = dst; v != src; v = prev_node[v]) {
      Arc& arc = graph[prev_node[v]][prev_arc[v]];
      arc.cap -= push;
      graph[arc.to][arc.rev].cap += push;
    }
    shipped += push;
  }

  Mat flow = Mat::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    if (supply(i) <= 0.0) continue;
    for (const Arc& arc : graph[i]) {
      if (arc.to >= m && arc.to < 2 * m) {
        const double f = graph[arc.to][arc.rev].cap;  // reverse capacity = shipped amount
        if (f > 0.0) flow(i, arc.to - m) = f;
      }
    }
  }
  return flow;
}

Mat feasible_av_flow(const NetworkInstance& instance, const MarketState& state, const Vec& idle_av) {
  const int m = instance.size();
  if (((state.idle_human + idle_av) - state.idle_total).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + idle_av.sum()))
    throw SolverError("idle AV vector inconsistent with the market state");
  const Vec share = state.human_share();
  const Vec av_share = Vec::Ones(m) - share;
  const Mat occupied = av_share.asDiagonal() * state.demand;
  const Vec imbalance = occupied.colwise().sum().transpose() - occupied.rowwise().sum();
  const double scale = imbalance.cwiseAbs().sum();
  if (std::abs(imbalance.sum()) > 1e-9 * (1.0 + scale))
    throw SolverError("AV occupied-flow imbalance does not cancel across zones");
  Vec out = imbalance.cwiseMax(0.0);
  Vec in = (-imbalance).cwiseMax(0.0);
  if (out.sum() <= 0.0) return Mat::Zero(m, m);
  in *= out.sum() / in.sum();
  return min_cost_transport(out, in, instance.travel_time);
}

void assemble_state(const NetworkInstance& instance, const BehaviorParams& params,
                    const PlatformDecision& decision, MarketState& state) {
  state.flow_av = feasible_av_flow(instance, state, decision.idle_av);
  const VehicleHours hours = vehicle_hours(state.demand, instance.travel_time, state.wait_passenger,
                                           state.idle_human, decision.idle_av);
  state.fleet_human = hours.human;
  state.fleet_av = hours.av;
  (void)params;
}

EquilibriumResult solve_market(const NetworkInstance& instance, const BehaviorParams& params,
                               const PlatformDecision& decision, const EquilibriumConfig& config) {
  EquilibriumResult result = equilibrium_fixed_point(instance, params, decision, config);
  if (result.converged) assemble_state(instance, params, decision, result.state);
  return result;
}

double ResidualReport::max() const {
  return std::max({demand, idle_sum, little_law, flow_definition, flow_balance_human, flow_balance_av, supply,
                   av_hours});
}

ResidualReport residual_report(const NetworkInstance& instance, const BehaviorParams& params,
                               const PlatformDecision& decision, const MarketState& state) {
  const int m = instance.size();
  ResidualReport rep;
  const double demand_floor = 1e-12 * (1.0 + instance.potential_demand.maxCoeff());
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double cost = generalized_cost(params.value_of_time, state.wait_passenger(i), decision.fare(i),
                                           instance.travel_time(i, j));
      const double expected =
          demand_rate(instance.potential_demand(i, j), cost, instance.outside_cost(i, j), params.demand_sensitivity);
      rep.demand = std::max(rep.demand, std::abs(state.demand(i, j) - expected) /
                                            std::max({expected, state.demand(i, j), demand_floor}));
    }
  }

  const Vec idle_sum = state.idle_human + decision.idle_av;
  for (int i = 0; i < m; ++i) {
    rep.idle_sum = std::max(rep.idle_sum,
                            std::abs(state.idle_total(i) - idle_sum(i)) / std::max(1.0, idle_sum(i)));
    const double outbound = state.demand.row(i).sum();
    if (outbound > 0.0) {
      rep.little_law = std::max(rep.little_law, std::abs(state.idle_total(i) - state.wait_vehicle(i) * outbound) /
                                                    std::max(1.0, state.idle_total(i)));
    } else if (state.idle_total(i) > demand_floor && std::isinf(state.wait_vehicle(i))) {
      rep.little_law = std::max(rep.little_law, 1.0);
    }
  }

  const Mat flow_expected =
      human_reposition_flow(state.reposition_prob, state.demand, state.idle_human, decision.idle_av);
  const double flow_scale = std::max(flow_expected.maxCoeff(), 1e-9 * (1.0 + state.demand.sum()));
  rep.flow_definition = (state.flow_human - flow_expected).cwiseAbs().maxCoeff() / flow_scale;

  const Vec share = state.human_share();
  const FlowResiduals balance = flow_balance_residuals(state.demand, share, state.flow_human, state.flow_av);
  const Mat occupied_h = share.asDiagonal() * state.demand;
  const Mat occupied_a = (Vec::Ones(m) - share).asDiagonal() * state.demand;
  for (int i = 0; i < m; ++i) {
    const double gross_h = occupied_h.row(i).sum() + occupied_h.col(i).sum() + state.flow_human.row(i).sum() +
                           state.flow_human.col(i).sum();
    const double gross_a = occupied_a.row(i).sum() + occupied_a.col(i).sum() + state.flow_av.row(i).sum() +
                           state.flow_av.col(i).sum();
    rep.flow_balance_human =
        std::max(rep.flow_balance_human, std::abs(balance.human(i)) / std::max(1e-9 * (1.0 + gross_h), gross_h));
    rep.flow_balance_av =
        std::max(rep.flow_balance_av, std::abs(balance.av(i)) / std::max(1e-9 * (1.0 + gross_a), gross_a));
  }

  const double budget = hire_budget(params, decision);
  rep.supply = std::abs(budget - state.fleet_human) / std::max(budget, 1.0);

  const VehicleHours hours = vehicle_hours(state.demand, instance.travel_time, state.wait_passenger,
                                           state.idle_human, decision.idle_av);
  rep.av_hours = std::abs(state.fleet_av - hours.av) / std::max(1.0, hours.av);
  return rep;
}

}  // namespace ridemix
