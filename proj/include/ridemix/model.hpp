#pragma once

#include "ridemix/types.hpp"

namespace ridemix {

/// 1 / (1 + exp(-z)), computed without overflow for any z.
double logistic(double z);

/// log(1 + exp(z)) without overflow.
double softplus(double z);

/// Generalized passenger cost of a ride: value_of_time * wait + fare * trip_time.
double generalized_cost(double value_of_time, double wait, double fare, double trip_time);

/// Realized passenger rate out of `potential`, given the ride cost and the
/// best competing mode's cost. Strictly decreasing in `cost`.
double demand_rate(double potential, double cost, double outside_cost, double sensitivity);

/// Square-root wait law. Throws std::domain_error when idle_vehicles <= 0;
/// zero-idle zones must be handled through the demand -> 0 limit instead.
double passenger_wait(double wait_coefficient, double idle_vehicles);

/// Hours of human drivers willing to work at the offered hourly wage.
double driver_supply(double pool, double wage, double reservation_wage, double sensitivity);

struct CommissionResult {
  double rate = 0.0;      // may be negative when the wage bill exceeds revenue
  bool negative = false;
};

/// Commission rate equivalent to paying `wage` ($/hour) over `human_hours`,
/// given fare revenue in $/min. Throws std::domain_error on zero revenue.
CommissionResult commission_from_wage(double wage, double human_hours, double fare_revenue_per_min);

struct TripStats {
  Vec mean_time;     // minutes, NaN for zones without outbound demand
  Vec mean_earning;  // $ per trip net of commission, NaN likewise
};

/// Demand-weighted mean trip time per origin zone and the driver's mean
/// per-trip earning at the given fares and commission rate.
TripStats trip_stats(const Mat& demand, const Mat& travel_time, const Vec& fare, double commission);

/// Row-stochastic matrix of repositioning choices. Row i compares the
/// per-minute earning of staying in i against relocating to each j. Zones with
/// undefined earning rates are effectively never chosen. sensitivity = 0
/// yields uniform rows.
Mat reposition_probabilities(const Vec& mean_earning, const Vec& mean_time, const Vec& wait_vehicle,
                             const Mat& travel_time, double sensitivity);

/// idle_human / (idle_human + idle_av) per zone, 0 where no vehicle idles.
/// Throws std::invalid_argument when a zone has outbound demand but no idle
/// vehicles (the matching split is undefined there).
Vec idle_split_shares(const Mat& demand, const Vec& idle_human, const Vec& idle_av);

/// Human repositioning flow: drivers dropping off in a zone redistribute
/// according to `prob`. A trip is human-driven with the idle share of its
/// origin zone.
Mat human_reposition_flow(const Mat& prob, const Mat& demand, const Vec& idle_human, const Vec& idle_av);

struct VehicleHours {
  double human = 0.0, av = 0.0;  // totals per type
  double in_service_human = 0.0, pickup_human = 0.0, idle_human = 0.0;
  double in_service_av = 0.0, pickup_av = 0.0, idle_av = 0.0;
  Vec wait_vehicle;  // minutes between rides per zone; +inf without outbound demand
};

/// Vehicle-hour accounting: in-service, pickup and idle hours split between
/// the two vehicle types, plus the per-zone wait between rides implied by the
/// idle counts (Little's law).
VehicleHours vehicle_hours(const Mat& demand, const Mat& travel_time, const Vec& wait_passenger,
                           const Vec& idle_human, const Vec& idle_av);

struct FlowResiduals {
  Vec human;  // inflow minus outflow per zone
  Vec av;
};

/// Per-zone flow-balance residuals for both vehicle types: occupied arrivals
/// plus repositioning arrivals, minus occupied departures and repositioning
/// departures. Residuals of each type sum to zero across zones for any input.
FlowResiduals flow_balance_residuals(const Mat& demand, const Vec& human_share, const Mat& flow_human,
                                     const Mat& flow_av);

/// Platform profit in $/min: fare revenue minus AV cost minus the wage bill
/// over the hired human vehicle-hours.
double platform_profit(const PlatformDecision& decision, const MarketState& state, const Mat& travel_time,
                       double av_cost);

/// Aggregate metrics including the logit log-sum surpluses. The social
/// welfare is the exact sum of the two surpluses and the platform profit.
MarketMetrics market_metrics(const NetworkInstance& instance, const BehaviorParams& params,
                             const PlatformDecision& decision, const MarketState& state);

}  // namespace ridemix
