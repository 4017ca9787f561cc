#pragma once

#include "ridemix/dual.hpp"
#include "ridemix/equilibrium.hpp"

#include <string>
#include <vector>

namespace ridemix {

struct RefineConfig {
  int max_evaluations = 4000;
  double initial_step = 0.1;  // fraction of each coordinate's scale
  double shrink = 0.5;
  double min_step = 1e-4;     // fraction of scale; search stops below this
  bool regulated = false;
  GridSpec grid;              // coordinate bounds and scales
  EquilibriumConfig equilibrium;
  std::optional<PlatformDecision> initial_override;  // extra starting candidate
};

struct Evaluation {
  bool feasible = false;
  double profit = 0.0;
  std::string cause;  // why the candidate was rejected
  EquilibriumResult market;
};

/// Profit of a decision through the equilibrium oracle, or an infeasibility
/// marker when the market does not settle (or the decision violates the wage
/// floor under regulation).
Evaluation evaluate_decision(const NetworkInstance& instance, const BehaviorParams& params,
                             const PlatformDecision& decision, bool regulated,
                             const EquilibriumConfig& config = {});

struct SolveReport {
  RelaxedSolution relaxed;
  PlatformDecision decision;
  MarketState state;
  double profit = 0.0;
  double upper_bound = 0.0;
  double gap = 0.0;
  bool gap_warning = false;  // profit exceeded the bound beyond slack
  int evaluations = 0;
  int infeasible_candidates = 0;
  bool feasible = false;   // some feasible point was found
  bool converged = false;  // the pattern search reached its minimum step
  std::string failure;     // set when no feasible point exists
  std::vector<double> profit_trace;
};

/// Coordinate pattern search over (wage, fares, idle AVs[, hire fraction])
/// starting from the relaxed solution, accepting only strictly improving
/// feasible moves and shrinking steps when a full cycle stalls.
SolveReport refine(const NetworkInstance& instance, const BehaviorParams& params, const RelaxedSolution& relaxed,
                   const RefineConfig& config);

/// (upper_bound - profit) / upper_bound, clamped at zero. Sets *bound_violation
/// when the profit exceeds the bound by more than numerical slack. Throws
/// std::domain_error for nonpositive bounds.
double optimality_gap(double profit, double upper_bound, bool* bound_violation = nullptr);

}  // namespace ridemix
