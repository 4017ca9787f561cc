#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ridemix {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

constexpr double kMinutesPerHour = 60.0;

inline double hourly_to_per_minute(double rate_per_hour) { return rate_per_hour / kMinutesPerHour; }
inline double per_minute_to_hourly(double rate_per_min) { return rate_per_min * kMinutesPerHour; }

inline double quiet_nan() { return std::numeric_limits<double>::quiet_NaN(); }
inline double infinity() { return std::numeric_limits<double>::infinity(); }

struct ZoneInfo {
  std::string zone_id;
  std::string postal_code;
  bool remote = false;
};

/// Static description of the service area. All matrices are M x M over the
/// same zone ordering as `zones`. Time unit is minutes throughout.
struct NetworkInstance {
  Mat travel_time;       // minutes; intra-zone entries may be positive
  Mat potential_demand;  // passengers per minute
  Mat outside_cost;      // $, generalized cost of the best competing mode
  std::vector<ZoneInfo> zones;

  int size() const { return static_cast<int>(zones.size()); }
  void validate() const;
};

/// Scalar behavior and cost parameters. Wages and the AV cost are quoted per
/// hour; conversion to the per-minute flow scale happens at the point of use.
struct BehaviorParams {
  double value_of_time = 3.0;           // $ per minute of passenger waiting
  double demand_sensitivity = 0.12;     // 1/$, passenger mode-choice logit
  double supply_sensitivity = 0.17;     // hour/$, driver entry logit
  double reposition_sensitivity = 0.1;  // per ($/min), driver repositioning logit
  double wait_coefficient = 43.0;       // min * sqrt(vehicles), square-root wait law
  double driver_pool = 10000.0;         // drivers looking for a job
  double reservation_wage = 29.34;      // $/hour, drivers' outside option
  double av_cost = 26.0;                // $/hour per deployed AV
  std::optional<double> min_wage;       // $/hour wage floor; absent = unregulated

  void validate() const;
};

/// Platform controls: wage, per-zone fares and idle-AV placement. The AV
/// repositioning flow is filled in when a full solution is assembled.
/// Under a wage floor the platform may hire only a fraction of the willing
/// drivers; without regulation every willing driver works (fraction 1).
struct PlatformDecision {
  double wage = 0.0;  // $/hour
  Vec fare;           // $/min of trip time, indexed by origin zone
  Vec idle_av;        // vehicles, >= 0
  std::optional<Mat> av_flow;  // vehicles/min, zero diagonal
  double hire_fraction = 1.0;

  void validate(int zones) const;
};

/// The endogenous market state induced by a platform decision.
struct MarketState {
  Mat demand;           // realized passenger rates, passengers/min
  Vec wait_passenger;   // minutes
  Vec wait_vehicle;     // minutes; +inf where a zone has no outbound demand
  Vec idle_human;       // vehicles
  Vec idle_total;       // idle_human + idle AVs
  Mat flow_human;       // human repositioning flow, vehicles/min
  Mat flow_av;          // AV repositioning flow, vehicles/min
  double fleet_av = 0.0;     // vehicle-hours, equivalently vehicles in steady state
  double fleet_human = 0.0;  // hired human vehicle-hours
  double commission = 0.0;   // platform share of fare revenue
  bool commission_negative = false;  // wage bill exceeded fare revenue
  Vec mean_trip_time;   // minutes per trip by origin; NaN without outbound demand
  Vec mean_earning;     // $ per trip net of commission; NaN likewise
  Mat reposition_prob;  // row-stochastic repositioning choice matrix

  Vec human_share() const;  // idle_human / idle_total, 0 where no idle vehicles
};

/// Aggregate and per-zone outcome measures.
struct MarketMetrics {
  double profit = 0.0;            // $/min
  double total_demand = 0.0;      // passengers/min
  double mean_fare = 0.0;         // $/ride
  double passenger_surplus = 0.0; // $/min
  double driver_surplus = 0.0;    // $/min
  double social_welfare = 0.0;    // $/min, = surpluses + profit by construction
  Vec zone_fare;
  Vec zone_wait_passenger;
  Vec zone_wait_vehicle;
  Vec zone_idle_av;
  Vec zone_idle_human;
  Vec zone_human_share;
};

}  // namespace ridemix
