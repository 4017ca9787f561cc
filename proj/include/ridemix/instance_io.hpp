#pragma once

#include "ridemix/dual.hpp"
#include "ridemix/equilibrium.hpp"
#include "ridemix/refine.hpp"
#include "ridemix/types.hpp"

#include <optional>
#include <stdexcept>
#include <string>

namespace ridemix {

/// Malformed or inconsistent input files; the message carries file and line.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optional solver settings read from params.json alongside the model
/// parameters. Absent fields keep the built-in defaults.
struct SolverOverrides {
  std::optional<int> fp_max_iters, dual_max_iters, fare_points, idle_points, wage_points, zoom_passes,
      refine_max_evals;
  std::optional<double> fp_damping, fp_tol, bisect_tol, dual_mu0, dual_tau0, dual_primal_tol, fare_lo, fare_hi,
      idle_cap, wage_lo, wage_hi, zoom_factor, refine_initial_step, refine_shrink, refine_min_step;

  void apply(EquilibriumConfig& config) const;
  void apply(GridSpec& grid) const;
  void apply(DualConfig& config) const;
  void apply(RefineConfig& config) const;
};

struct InstanceBundle {
  NetworkInstance instance;
  BehaviorParams params;
  SolverOverrides overrides;
};

/// Reads zones.csv, travel_time.csv, demand.csv, outside_cost.csv and
/// params.json from a directory. Throws DataError with file and line
/// information on malformed input; unknown params.json keys are rejected.
InstanceBundle read_instance_dir(const std::string& dir);

/// Writes the five instance files. Numbers round-trip exactly through
/// read_instance_dir; rewriting an instance reproduces the bytes.
void write_instance_dir(const std::string& dir, const NetworkInstance& instance, const BehaviorParams& params,
                        const SolverOverrides& overrides = {});

/// Deterministic decimal formatting used by every CSV writer ('.' separator,
/// value-preserving precision).
std::string format_double(double v);

}  // namespace ridemix
