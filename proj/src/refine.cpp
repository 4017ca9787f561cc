#include "ridemix/refine.hpp"

#include "ridemix/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ridemix {

Evaluation evaluate_decision(const NetworkInstance& instance, const BehaviorParams& params,
                             const PlatformDecision& decision, bool regulated, const EquilibriumConfig& config) {
  Evaluation out;
  if (regulated && params.min_wage && decision.wage < *params.min_wage - 1e-12) {
    out.cause = "wage below the regulatory floor";
    return out;
  }
  out.market = solve_market(instance, params, decision, config);
  if (!out.market.converged) {
    out.cause = out.market.failure.empty() ? "equilibrium did not converge" : out.market.failure;
    return out;
  }
  out.feasible = true;
  out.profit = platform_profit(decision, out.market.state, instance.travel_time, params.av_cost);
  return out;
}

namespace {

struct CoordinateSpace {
  int zones = 0;
  bool regulated = false;
  double wage_lo = 0.0, wage_hi = 0.0;
  double fare_lo = 0.0, fare_hi = 0.0;
  double idle_cap = 0.0;

  int count() const { return 1 + 2 * zones + (regulated ? 1 : 0); }

  double get(const PlatformDecision& d, int c) const {
    if (c == 0) return d.wage;
    if (c <= zones) return d.fare(c - 1);
    if (c <= 2 * zones) return d.idle_av(c - zones - 1);
    return d.hire_fraction;
  }

  void set(PlatformDecision& d, int c, double v) const {
    if (c == 0)
      d.wage = v;
    else if (c <= zones)
      d.fare(c - 1) = v;
    else if (c <= 2 * zones)
      d.idle_av(c - zones - 1) = v;
    else
      d.hire_fraction = v;
  }

  double lo(int c) const {
    if (c == 0) return wage_lo;
    if (c <= zones) return fare_lo;
    if (c <= 2 * zones) return 0.0;
    return 0.0;
  }

  double hi(int c) const {
    if (c == 0) return wage_hi;
    if (c <= zones) return fare_hi;
    if (c <= 2 * zones) return idle_cap;
    return 1.0;
  }

  double scale(int c) const { return hi(c) - lo(c); }

  void clamp(PlatformDecision& d) const {
    for (int c = 0; c < count(); ++c) set(d, c, std::clamp(get(d, c), lo(c), hi(c)));
  }
};

}  // namespace

SolveReport refine(const NetworkInstance& instance, const BehaviorParams& params, const RelaxedSolution& relaxed,
                   const RefineConfig& config) {
  const int m = instance.size();
  SolveReport report;
  report.relaxed = relaxed;
  report.upper_bound = relaxed.upper_bound;

  CoordinateSpace space;
  space.zones = m;
  space.regulated = config.regulated;
  space.wage_lo = config.grid.wage_lo;
  if (config.regulated && params.min_wage) space.wage_lo = std::max(space.wage_lo, *params.min_wage);
  space.wage_hi = config.grid.wage_hi;
  space.fare_lo = config.grid.fare_lo;
  space.fare_hi = config.grid.fare_hi;
  space.idle_cap = config.grid.resolve_idle_cap(params.wait_coefficient);

  EquilibriumConfig eq = config.equilibrium;

  auto try_point = [&](const PlatformDecision& candidate, const Vec* warm) -> Evaluation {
    EquilibriumConfig local = eq;
    if (warm) local.warm_start = *warm;
    ++report.evaluations;
    Evaluation ev = evaluate_decision(instance, params, candidate, config.regulated, local);
    if (!ev.feasible) ++report.infeasible_candidates;
    return ev;
  };

  // Primary starts: the relaxed point and an optional override (e.g. a
  // neighboring sweep solution). Fallbacks are only consulted when neither
  // primary induces a settled market.
  PlatformDecision base = relaxed.decision;
  if (!config.regulated) base.hire_fraction = 1.0;
  space.clamp(base);
  std::vector<PlatformDecision> primary;
  if (config.initial_override) {
    PlatformDecision o = *config.initial_override;
    space.clamp(o);
    primary.push_back(o);
  }
  primary.push_back(base);

  PlatformDecision current;
  Evaluation best;
  std::string last_cause;
  for (const PlatformDecision& s : primary) {
    Evaluation ev = try_point(s, nullptr);
    if (ev.feasible && (!best.feasible || ev.profit > best.profit)) {
      best = ev;
      current = s;
    }
    if (!ev.feasible) last_cause = ev.cause;
  }
  if (!best.feasible) {
    PlatformDecision all_human = base;
    all_human.idle_av.setZero();
    all_human.hire_fraction = 1.0;
    PlatformDecision mid = base;
    mid.wage = 0.5 * (space.wage_lo + space.wage_hi);
    mid.fare.setConstant(std::clamp(1.0, space.fare_lo, space.fare_hi));
    mid.idle_av.setZero();
    mid.hire_fraction = 1.0;
    for (const PlatformDecision& s : {all_human, mid}) {
      Evaluation ev = try_point(s, nullptr);
      if (ev.feasible) {
        best = ev;
        current = s;
        break;
      }
      last_cause = ev.cause;
    }
  }
  if (!best.feasible) {
    report.failure = "no feasible starting point: " + last_cause;
    return report;
  }
  report.feasible = true;
  report.profit_trace.push_back(best.profit);

  double step = config.initial_step;
  while (step >= config.min_step && report.evaluations < config.max_evaluations) {
    bool improved = false;
    for (int c = 0; c < space.count() && report.evaluations < config.max_evaluations; ++c) {
      const double scale = space.scale(c);
      if (scale <= 0.0) continue;
      for (const double dir : {+1.0, -1.0}) {
        const double moved = std::clamp(space.get(current, c) + dir * step * scale, space.lo(c), space.hi(c));
        if (moved == space.get(current, c)) continue;
        PlatformDecision candidate = current;
        space.set(candidate, c, moved);
        Evaluation ev = try_point(candidate, &best.market.state.idle_human);
        if (ev.feasible && ev.profit > best.profit) {
          best = ev;
          current = candidate;
          report.profit_trace.push_back(best.profit);
          improved = true;
          break;
        }
        if (report.evaluations >= config.max_evaluations) break;
      }
    }
    if (!improved) {
      step *= config.shrink;
      if (step < config.min_step) {
        report.converged = true;
        break;
      }
    }
  }

  report.decision = current;
  report.decision.av_flow = best.market.state.flow_av;
  report.state = best.market.state;
  report.profit = best.profit;
  report.gap = optimality_gap(report.profit, report.upper_bound, &report.gap_warning);
  return report;
}

double optimality_gap(double profit, double upper_bound, bool* bound_violation) {
  if (bound_violation) *bound_violation = false;
  if (!(upper_bound > 0.0)) throw std::domain_error("optimality gap undefined for a nonpositive upper bound");
  const double gap = (upper_bound - profit) / upper_bound;
  if (gap < -1e-9 && bound_violation) *bound_violation = true;
  return std::max(0.0, gap);
}

}  // namespace ridemix
