#include "ridemix/model.hpp"

#include <cmath>
#include <stdexcept>

namespace ridemix {

void NetworkInstance::validate() const {
  const int m = size();
  if (m <= 0) throw std::invalid_argument("instance has no zones");
  auto check = [m](const Mat& a, const char* name) {
    if (a.rows() != m || a.cols() != m)
      throw std::invalid_argument(std::string(name) + ": expected square matrix matching zone count");
    if (!a.allFinite() || (a.array() < 0.0).any())
      throw std::invalid_argument(std::string(name) + ": entries must be finite and nonnegative");
  };
  check(travel_time, "travel_time");
  check(potential_demand, "potential_demand");
  check(outside_cost, "outside_cost");
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (potential_demand(i, j) > 0.0 && travel_time(i, j) <= 0.0)
        throw std::invalid_argument("travel_time must be positive wherever potential demand is positive");
}

void BehaviorParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(value_of_time, "alpha");
  positive(demand_sensitivity, "eps");
  positive(supply_sensitivity, "sigma");
  positive(wait_coefficient, "L");
  positive(driver_pool, "N0");
  positive(reservation_wage, "q0");
  positive(av_cost, "D");
  if (reposition_sensitivity < 0.0 || !std::isfinite(reposition_sensitivity))
    throw std::invalid_argument("eta must be nonnegative");
  if (min_wage && (*min_wage < 0.0 || !std::isfinite(*min_wage)))
    throw std::invalid_argument("q_min must be nonnegative");
}

void PlatformDecision::validate(int zones) const {
  if (!(wage > 0.0)) throw std::invalid_argument("wage must be positive");
  if (fare.size() != zones || idle_av.size() != zones)
    throw std::invalid_argument("decision vectors must match zone count");
  if ((fare.array() <= 0.0).any()) throw std::invalid_argument("fares must be positive");
  if ((idle_av.array() < 0.0).any()) throw std::invalid_argument("idle AV counts must be nonnegative");
  if (hire_fraction < 0.0 || hire_fraction > 1.0)
    throw std::invalid_argument("hire fraction must lie in [0,1]");
  if (av_flow) {
    if (av_flow->rows() != zones || av_flow->cols() != zones)
      throw std::invalid_argument("AV flow must be square matching zone count");
    if ((av_flow->array() < 0.0).any() || av_flow->diagonal().cwiseAbs().maxCoeff() > 0.0)
      throw std::invalid_argument("AV flow must be nonnegative with zero diagonal");
  }
}

Vec MarketState::human_share() const {
  Vec share = Vec::Zero(idle_total.size());
  for (int i = 0; i < idle_total.size(); ++i)
    if (idle_total(i) > 0.0) share(i) = idle_human(i) / idle_total(i);
  return share;
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  if (z > 0.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double generalized_cost(double value_of_time, double wait, double fare, double trip_time) {
  return value_of_time * wait + fare * trip_time;
}

double demand_rate(double potential, double cost, double outside_cost, double sensitivity) {
  if (potential == 0.0) return 0.0;
  return potential * logistic(sensitivity * (outside_cost - cost));
}

double passenger_wait(double wait_coefficient, double idle_vehicles) {
  if (!(idle_vehicles > 0.0)) throw std::domain_error("passenger_wait requires positive idle vehicles");
  return wait_coefficient / std::sqrt(idle_vehicles);
}

double driver_supply(double pool, double wage, double reservation_wage, double sensitivity) {
  return pool * logistic(sensitivity * (wage - reservation_wage));
}

CommissionResult commission_from_wage(double wage, double human_hours, double fare_revenue_per_min) {
  if (!(fare_revenue_per_min > 0.0)) throw std::domain_error("commission undefined at zero fare revenue");
  CommissionResult out;
  out.rate = 1.0 - hourly_to_per_minute(wage) * human_hours / fare_revenue_per_min;
  out.negative = out.rate < 0.0;
  return out;
}

TripStats trip_stats(const Mat& demand, const Mat& travel_time, const Vec& fare, double commission) {
  const int m = static_cast<int>(demand.rows());
  TripStats out;
  out.mean_time = Vec::Constant(m, quiet_nan());
  out.mean_earning = Vec::Constant(m, quiet_nan());
  for (int i = 0; i < m; ++i) {
    const double outbound = demand.row(i).sum();
    if (outbound > 0.0) {
      out.mean_time(i) = demand.row(i).dot(travel_time.row(i)) / outbound;
      out.mean_earning(i) = (1.0 - commission) * fare(i) * out.mean_time(i);
    }
  }
  return out;
}

Mat reposition_probabilities(const Vec& mean_earning, const Vec& mean_time, const Vec& wait_vehicle,
                             const Mat& travel_time, double sensitivity) {
  const int m = static_cast<int>(mean_earning.size());
  if (sensitivity == 0.0) return Mat::Constant(m, m, 1.0 / m);

  // Per-minute earning of ending up in zone j, for a driver currently in i.
  Mat utility(m, m);
  double defined_min = infinity();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double detour = (i == j) ? 0.0 : travel_time(i, j);
      const double horizon = wait_vehicle(j) + detour + mean_time(j);
      const double u = mean_earning(j) / horizon;
      utility(i, j) = std::isfinite(u) ? u : quiet_nan();
      if (std::isfinite(u)) defined_min = std::min(defined_min, u);
    }
  }
  const double fallback = std::isfinite(defined_min) ? defined_min - 10.0 / sensitivity : 0.0;
  utility = utility.unaryExpr([fallback](double u) { return std::isfinite(u) ? u : fallback; });

  Mat prob(m, m);
  for (int i = 0; i < m; ++i) {
    const Eigen::ArrayXd scaled = sensitivity * utility.row(i).transpose().array();
    const Eigen::ArrayXd weights = (scaled - scaled.maxCoeff()).exp();
    prob.row(i) = (weights / weights.sum()).transpose();
  }
  return prob;
}

Vec idle_split_shares(const Mat& demand, const Vec& idle_human, const Vec& idle_av) {
  const int m = static_cast<int>(idle_human.size());
  Vec share = Vec::Zero(m);
  for (int i = 0; i < m; ++i) {
    const double total = idle_human(i) + idle_av(i);
    if (total > 0.0) {
      share(i) = idle_human(i) / total;
    } else if (demand.row(i).sum() > 0.0) {
      throw std::invalid_argument("idle split undefined: zone with demand has no idle vehicles");
    }
  }
  return share;
}

Mat human_reposition_flow(const Mat& prob, const Mat& demand, const Vec& idle_human, const Vec& idle_av) {
  const Vec share = idle_split_shares(demand, idle_human, idle_av);
  const Vec dropoffs = demand.transpose() * share;  // human drop-off rate per zone
  return dropoffs.asDiagonal() * prob;
}

VehicleHours vehicle_hours(const Mat& demand, const Mat& travel_time, const Vec& wait_passenger,
                           const Vec& idle_human, const Vec& idle_av) {
  const int m = static_cast<int>(idle_human.size());
  const Vec share = idle_split_shares(demand, idle_human, idle_av);
  VehicleHours out;
  out.wait_vehicle = Vec::Constant(m, infinity());
  for (int i = 0; i < m; ++i) {
    const double outbound = demand.row(i).sum();
    const double service = demand.row(i).dot(travel_time.row(i));
    const double pickup = outbound > 0.0 ? outbound * wait_passenger(i) : 0.0;
    out.in_service_human += share(i) * service;
    out.in_service_av += (1.0 - share(i)) * service;
    out.pickup_human += share(i) * pickup;
    out.pickup_av += (1.0 - share(i)) * pickup;
    if (outbound > 0.0) out.wait_vehicle(i) = (idle_human(i) + idle_av(i)) / outbound;
  }
  out.idle_human = idle_human.sum();
  out.idle_av = idle_av.sum();
  out.human = out.in_service_human + out.pickup_human + out.idle_human;
  out.av = out.in_service_av + out.pickup_av + out.idle_av;
  return out;
}

FlowResiduals flow_balance_residuals(const Mat& demand, const Vec& human_share, const Mat& flow_human,
                                     const Mat& flow_av) {
  const int m = static_cast<int>(demand.rows());
  const Vec av_share = Vec::Ones(m) - human_share;
  const Mat occupied_h = human_share.asDiagonal() * demand;  // share taken at the trip origin
  const Mat occupied_a = av_share.asDiagonal() * demand;
  FlowResiduals out;
  out.human = (occupied_h + flow_human).colwise().sum().transpose() -
              (occupied_h + flow_human).rowwise().sum();
  out.av = (occupied_a + flow_av).colwise().sum().transpose() -
           (occupied_a + flow_av).rowwise().sum();
  return out;
}

double platform_profit(const PlatformDecision& decision, const MarketState& state, const Mat& travel_time,
                       double av_cost) {
  double revenue = 0.0;
  for (int i = 0; i < state.demand.rows(); ++i)
    revenue += decision.fare(i) * state.demand.row(i).dot(travel_time.row(i));
  return revenue - hourly_to_per_minute(av_cost) * state.fleet_av -
         hourly_to_per_minute(decision.wage) * state.fleet_human;
}

MarketMetrics market_metrics(const NetworkInstance& instance, const BehaviorParams& params,
                             const PlatformDecision& decision, const MarketState& state) {
  const int m = instance.size();
  MarketMetrics out;
  out.profit = platform_profit(decision, state, instance.travel_time, params.av_cost);
  out.total_demand = state.demand.sum();

  double revenue = 0.0;
  for (int i = 0; i < m; ++i) revenue += decision.fare(i) * state.demand.row(i).dot(instance.travel_time.row(i));
  out.mean_fare = out.total_demand > 0.0 ? revenue / out.total_demand : 0.0;

  // Logit log-sum surpluses, anchored so that an unserved market yields zero.
  double ps = 0.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double potential = instance.potential_demand(i, j);
      if (potential == 0.0) continue;
      const double cost = generalized_cost(params.value_of_time, state.wait_passenger(i), decision.fare(i),
                                           instance.travel_time(i, j));
      ps += potential / params.demand_sensitivity *
            softplus(-params.demand_sensitivity * (cost - instance.outside_cost(i, j)));
    }
  }
  out.passenger_surplus = ps;
  out.driver_surplus =
      hourly_to_per_minute(params.driver_pool / params.supply_sensitivity *
                           softplus(params.supply_sensitivity * (decision.wage - params.reservation_wage)));
  out.social_welfare = out.passenger_surplus + out.driver_surplus + out.profit;

  out.zone_fare = decision.fare;
  out.zone_wait_passenger = state.wait_passenger;
  out.zone_wait_vehicle = state.wait_vehicle;
  out.zone_idle_av = decision.idle_av;
  out.zone_idle_human = state.idle_human;
  out.zone_human_share = state.human_share();
  return out;
}

}  // namespace ridemix
