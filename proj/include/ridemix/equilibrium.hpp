#pragma once

#include "ridemix/types.hpp"

#include <stdexcept>
#include <vector>

namespace ridemix {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The repositioning inflow a zone must absorb exceeds what the zone can
/// serve at full driver supply (the concentration condition fails there).
struct InfeasibleTargetError : SolverError {
  using SolverError::SolverError;
};

struct EquilibriumConfig {
  int max_outer_iters = 500;
  double damping = 0.5;       // Picard step weight in (0,1]
  double fp_tol = 1e-8;       // relative residual tolerance
  double bisect_tol = 1e-10;  // absolute tolerance on the idle-vehicle roots
  bool check_existence = false;
  std::optional<Vec> warm_start;  // initial idle-human iterate
};

struct ExistenceReport {
  // Both limit conditions hold identically for the logit demand model with a
  // square-root wait law; recorded for the report.
  bool demand_vanishes_without_idle = true;
  bool wait_tail_vanishes = true;

  enum class ZoneStatus { pass, boundary, fail };
  std::vector<ZoneStatus> concentration;  // per-zone inflow <= outflow check
  Vec inflow, outflow;                    // the two sides, vehicles/min

  bool all_pass() const;
  bool any_fail() const;
};

/// Evaluates the equilibrium existence conditions for a decision. The
/// concentration condition places every willing driver idle in one zone and
/// compares the repositioning flow leaving it against the passenger flow it
/// can serve.
ExistenceReport check_existence_conditions(const NetworkInstance& instance, const BehaviorParams& params,
                                           const PlatformDecision& decision);

/// Unique root x >= 0 of
///   x/(idle_av + x) * sum_j demand_j(x) == inbound_flow_target
/// for the given zone; the left side is strictly increasing in x. Bracketed
/// bisection on [0, supply_budget]. Throws InfeasibleTargetError when the
/// target exceeds the value at the budget.
double solve_idle_scalar(int zone, double inbound_flow_target, const NetworkInstance& instance,
                         const BehaviorParams& params, const PlatformDecision& decision, double supply_budget,
                         double bisect_tol = 1e-10);

struct EquilibriumResult {
  MarketState state;
  bool converged = false;
  int iterations = 0;
  double max_residual = infinity();
  std::vector<double> residual_history;
  std::string failure;  // nonempty when not converged
  ExistenceReport existence;
};

/// Damped fixed-point iteration on the idle-human vector. On convergence the
/// state satisfies demand consistency, Little's law, the human flow balance
/// and the driver-hours budget; AV flows and fleet totals are not yet filled.
EquilibriumResult equilibrium_fixed_point(const NetworkInstance& instance, const BehaviorParams& params,
                                          const PlatformDecision& decision, const EquilibriumConfig& config = {});

/// Exact minimum-cost transportation plan: ships `supply` into `demand`
/// (same zone indexing, totals equal) minimizing sum f_ij * cost_ij.
Mat min_cost_transport(const Vec& supply, const Vec& demand, const Mat& cost);

/// Nonnegative zero-diagonal AV repositioning flow balancing the occupied AV
/// flows of `state`, chosen to minimize total time-weighted flow.
Mat feasible_av_flow(const NetworkInstance& instance, const MarketState& state, const Vec& idle_av);

/// Fills the AV flow and both fleet totals of a converged state.
void assemble_state(const NetworkInstance& instance, const BehaviorParams& params,
                    const PlatformDecision& decision, MarketState& state);

/// equilibrium_fixed_point + feasible_av_flow + assemble_state.
EquilibriumResult solve_market(const NetworkInstance& instance, const BehaviorParams& params,
                               const PlatformDecision& decision, const EquilibriumConfig& config = {});

struct ResidualReport {
  double demand = 0.0;        // realized rates vs the demand curve
  double idle_sum = 0.0;      // idle totals vs the two idle vectors
  double little_law = 0.0;    // idle totals vs wait * outbound rate
  double flow_definition = 0.0;  // human flow vs choice probabilities
  double flow_balance_human = 0.0;
  double flow_balance_av = 0.0;
  double supply = 0.0;        // hired hours vs the wage budget
  double av_hours = 0.0;      // AV fleet total vs its accounting
  double max() const;
};

/// Relative residuals of every equilibrium constraint at a full state.
ResidualReport residual_report(const NetworkInstance& instance, const BehaviorParams& params,
                               const PlatformDecision& decision, const MarketState& state);

/// Hired human vehicle-hours budget implied by a decision: the willing supply
/// scaled by the hire fraction.
double hire_budget(const BehaviorParams& params, const PlatformDecision& decision);

}  // namespace ridemix
