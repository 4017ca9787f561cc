#pragma once

#include "ridemix/types.hpp"

#include <vector>

namespace ridemix {

/// Uniformly spaced grid over [lo, hi]; n == 1 collapses to lo.
Vec linspace(double lo, double hi, int n);

/// Grid specification for the relaxed-problem searches and the refiner's
/// coordinate scales.
struct GridSpec {
  double fare_lo = 0.05, fare_hi = 5.0;  // $/min
  int fare_points = 50;
  double idle_cap = 0.0;  // vehicles per zone; 0 resolves to 3 L^2
  int idle_points = 50;
  double wage_lo = 1.0, wage_hi = 60.0;  // $/hour
  int wage_points = 120;
  int zoom_passes = 3;
  double zoom_factor = 10.0;

  double resolve_idle_cap(double wait_coefficient) const;
};

struct DualConfig {
  double mu0 = quiet_nan();   // $/hour; NaN starts at the drivers' reservation wage
  double tau0 = quiet_nan();  // NaN auto-scales to mu0 over the first residual
  int max_iters = 2000;
  double primal_tol = 1e-4;   // relative tolerance on the supply coupling residual
  int final_candidates = 4;   // multipliers re-evaluated with zoomed grids at the end
  GridSpec grid;
};

/// Exact evaluator of the per-zone Lagrangian term at an arbitrary point.
double zone_lagrangian_value(int zone, const NetworkInstance& instance, const BehaviorParams& params, double mu,
                             double fare, double idle_av, double idle_human);

/// The wage term of the Lagrangian: willing supply valued at mu minus the
/// wage bill, in $/min.
double wage_lagrangian_value(double mu, double wage, const BehaviorParams& params);

/// The whole Lagrangian evaluated directly (not zone by zone) at a primal
/// point of the relaxed problem.
double lagrangian_direct(const NetworkInstance& instance, const BehaviorParams& params, double mu, double wage,
                         const Vec& fare, const Vec& idle_av, const Vec& idle_human);

struct ZoneSearchResult {
  double fare = 0.0;
  double idle_total = 0.0;
  double value = 0.0;        // $/min
  double served_hours = 0.0; // occupied + pickup vehicle-hours at the optimum
  bool at_cap = false;
};

/// Grid search with zoom refinement of max_{fare, idle} revenue(fare, idle)
/// minus cost_per_hour * (idle + served hours). The cap grows automatically
/// when the optimum presses against it.
ZoneSearchResult zone_value_search(int zone, double cost_per_hour, const NetworkInstance& instance,
                                   const BehaviorParams& params, const GridSpec& grid, bool allow_cap_growth = true);

struct ZoneSubproblemResult {
  double fare = 0.0;
  double idle_av = 0.0;
  double idle_human = 0.0;
  double value = 0.0;
  bool at_cap = false;
};

/// Maximizer of the zone term of the Lagrangian over the refined grid. The
/// idle split is resolved analytically: the term is linear in the split at a
/// fixed total, so the cheaper vehicle type takes the whole total (AVs on a
/// tie).
ZoneSubproblemResult zone_subproblem(int zone, double mu, const NetworkInstance& instance,
                                     const BehaviorParams& params, const GridSpec& grid);

struct WageSubproblemResult {
  double wage = 0.0;
  double value = 0.0;  // $/min
};

/// Maximizer of the wage term over the refined one-dimensional grid,
/// restricted to wages at or above `wage_floor`.
WageSubproblemResult wage_subproblem(double mu, const BehaviorParams& params, double wage_floor,
                                     const GridSpec& grid);

/// Subgradient step on the multiplier; the regulated variant projects onto
/// mu >= 0 because its supply constraint is an inequality.
double dual_update(double mu, double supply_residual, double tau, bool regulated);

struct RelaxedSolution {
  PlatformDecision decision;  // wage, fares, idle AVs; hire_fraction under regulation
  Vec idle_human;
  double upper_bound = 0.0;   // $/min, valid bound on the original problem
  double dual_residual = 0.0; // relative supply-coupling residual at termination
  bool feasible = false;      // residual met the tolerance before the iteration cap
  int iterations = 0;
  double mu_best = 0.0;       // $/hour
  std::vector<double> mu_trajectory;
  double hired_hours = 0.0;
  double willing_hours = 0.0;
  bool any_zone_at_cap = false;
};

/// Algorithm: solve the per-zone and wage subproblems, update the multiplier
/// by a diminishing-step subgradient rule, track the best dual value, and
/// finish by re-evaluating the best multipliers on zoomed grids. The returned
/// bound is the tightest dual value observed.
RelaxedSolution run_dual(const NetworkInstance& instance, const BehaviorParams& params, const DualConfig& config,
                         bool regulated);

}  // namespace ridemix
