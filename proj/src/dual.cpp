#include "ridemix/dual.hpp"

#include "ridemix/equilibrium.hpp"
#include "ridemix/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace ridemix {

Vec linspace(double lo, double hi, int n) {
  if (n <= 1) return Vec::Constant(1, lo);
  Vec out(n);
  const double step = (hi - lo) / (n - 1);
  for (int i = 0; i < n; ++i) out(i) = lo + step * i;
  out(n - 1) = hi;
  return out;
}

double GridSpec::resolve_idle_cap(double wait_coefficient) const {
  return idle_cap > 0.0 ? idle_cap : 3.0 * wait_coefficient * wait_coefficient;
}

namespace {

// Revenue and served vehicle-hours of one zone at a fare and an idle total.
struct ZoneCell {
  double revenue = 0.0;  // $/min
  double served = 0.0;   // occupied + pickup vehicle-hours
};

ZoneCell zone_cell(int zone, double fare, double idle_total, const NetworkInstance& inst,
                   const BehaviorParams& p) {
  ZoneCell cell;
  if (idle_total <= 0.0) return cell;
  const double wait = passenger_wait(p.wait_coefficient, idle_total);
  const int m = inst.size();
  double trip_minutes = 0.0, riders = 0.0;
  for (int j = 0; j < m; ++j) {
    const double cost = generalized_cost(p.value_of_time, wait, fare, inst.travel_time(zone, j));
    const double rate =
        demand_rate(inst.potential_demand(zone, j), cost, inst.outside_cost(zone, j), p.demand_sensitivity);
    riders += rate;
    trip_minutes += rate * inst.travel_time(zone, j);
  }
  cell.revenue = fare * trip_minutes;
  cell.served = trip_minutes + riders * wait;
  return cell;
}

double cell_value(const ZoneCell& cell, double idle_total, double cost_per_hour) {
  return cell.revenue - hourly_to_per_minute(cost_per_hour) * (idle_total + cell.served);
}

// Upper envelope of lines y = intercept + slope * x with integer payloads.
class LineEnvelope {
 public:
  void add(double slope, double intercept, int payload) { raw_.push_back({slope, intercept, payload}); }

  void build() {
    std::sort(raw_.begin(), raw_.end(), [](const Line& a, const Line& b) {
      return a.slope != b.slope ? a.slope < b.slope : a.intercept < b.intercept;
    });
    hull_.clear();
    for (const Line& line : raw_) {
      if (!hull_.empty() && hull_.back().slope == line.slope) hull_.pop_back();
      while (hull_.size() >= 2 && dominated(hull_[hull_.size() - 2], hull_.back(), line)) hull_.pop_back();
      hull_.push_back(line);
    }
    breaks_.clear();
    for (size_t i = 0; i + 1 < hull_.size(); ++i)
      breaks_.push_back((hull_[i].intercept - hull_[i + 1].intercept) /
                        (hull_[i + 1].slope - hull_[i].slope));
  }

  std::pair<double, int> max_at(double x) const {
    const size_t idx = std::upper_bound(breaks_.begin(), breaks_.end(), x) - breaks_.begin();
    const Line& line = hull_[idx];
    return {line.intercept + line.slope * x, line.payload};
  }

 private:
  struct Line {
    double slope, intercept;
    int payload;
  };
  static bool dominated(const Line& a, const Line& b, const Line& c) {
    // b never attains the maximum between a and c.
    return (c.intercept - a.intercept) * (b.slope - a.slope) >=
           (b.intercept - a.intercept) * (c.slope - a.slope);
  }
  std::vector<Line> raw_;
  std::vector<Line> hull_;
  std::vector<double> breaks_;
};

struct ZoneGrid {
  std::vector<double> fare, idle, served;  // parallel arrays over grid cells
  LineEnvelope envelope;                   // value as a function of the hourly cost coefficient
};

ZoneGrid build_zone_grid(int zone, const NetworkInstance& inst, const BehaviorParams& p, const GridSpec& grid) {
  const double cap = grid.resolve_idle_cap(p.wait_coefficient);
  const Vec fares = linspace(grid.fare_lo, grid.fare_hi, grid.fare_points);
  const Vec idles = linspace(0.0, cap, grid.idle_points);
  ZoneGrid zg;
  int payload = 0;
  for (int a = 0; a < fares.size(); ++a) {
    for (int b = 0; b < idles.size(); ++b) {
      const ZoneCell cell = zone_cell(zone, fares(a), idles(b), inst, p);
      zg.fare.push_back(fares(a));
      zg.idle.push_back(idles(b));
      zg.served.push_back(cell.served);
      zg.envelope.add(-(idles(b) + cell.served) / kMinutesPerHour, cell.revenue, payload++);
    }
  }
  zg.envelope.build();
  return zg;
}

}  // namespace

double zone_lagrangian_value(int zone, const NetworkInstance& inst, const BehaviorParams& p, double mu,
                             double fare, double idle_av, double idle_human) {
  const double total = idle_av + idle_human;
  const ZoneCell cell = zone_cell(zone, fare, total, inst, p);
  const double share = total > 0.0 ? idle_human / total : 0.0;
  return cell.revenue -
         hourly_to_per_minute(p.av_cost) * ((1.0 - share) * cell.served + idle_av) -
         hourly_to_per_minute(mu) * (share * cell.served + idle_human);
}

double wage_lagrangian_value(double mu, double wage, const BehaviorParams& p) {
  return hourly_to_per_minute(
      (mu - wage) * driver_supply(p.driver_pool, wage, p.reservation_wage, p.supply_sensitivity));
}

double lagrangian_direct(const NetworkInstance& inst, const BehaviorParams& p, double mu, double wage,
                         const Vec& fare, const Vec& idle_av, const Vec& idle_human) {
  const int m = inst.size();
  double revenue = 0.0, av_hours = idle_av.sum(), human_hours = idle_human.sum();
  for (int i = 0; i < m; ++i) {
    const double total = idle_av(i) + idle_human(i);
    const ZoneCell cell = zone_cell(i, fare(i), total, inst, p);
    const double share = total > 0.0 ? idle_human(i) / total : 0.0;
    revenue += cell.revenue;
    av_hours += (1.0 - share) * cell.served;
    human_hours += share * cell.served;
  }
  const double willing = driver_supply(p.driver_pool, wage, p.reservation_wage, p.supply_sensitivity);
  return revenue - hourly_to_per_minute(p.av_cost) * av_hours +
         hourly_to_per_minute(mu) * (willing - human_hours) - hourly_to_per_minute(wage) * willing;
}

ZoneSearchResult zone_value_search(int zone, double cost_per_hour, const NetworkInstance& inst,
                                   const BehaviorParams& p, const GridSpec& grid, bool allow_cap_growth) {
  double cap = grid.resolve_idle_cap(p.wait_coefficient);
  const double base_cap = cap;
  ZoneSearchResult best;

  for (int attempt = 0; attempt < 6; ++attempt) {
    best = ZoneSearchResult{};
    best.value = -infinity();
    double fare_width = grid.fare_hi - grid.fare_lo;
    double idle_width = cap;
    double fare_center = 0.5 * (grid.fare_lo + grid.fare_hi);
    double idle_center = 0.5 * cap;
    for (int pass = 0; pass <= grid.zoom_passes; ++pass) {
      const double fare_lo = std::max(grid.fare_lo, fare_center - 0.5 * fare_width);
      const double fare_hi = std::min(grid.fare_hi, fare_center + 0.5 * fare_width);
      const double idle_lo = std::max(0.0, idle_center - 0.5 * idle_width);
      const double idle_hi = std::min(cap, idle_center + 0.5 * idle_width);
      const Vec fares = linspace(fare_lo, fare_hi, grid.fare_points);
      const Vec idles = linspace(idle_lo, idle_hi, grid.idle_points);
      for (int a = 0; a < fares.size(); ++a) {
        for (int b = 0; b < idles.size(); ++b) {
          const ZoneCell cell = zone_cell(zone, fares(a), idles(b), inst, p);
          const double value = cell_value(cell, idles(b), cost_per_hour);
          if (value > best.value) {
            best.value = value;
            best.fare = fares(a);
            best.idle_total = idles(b);
            best.served_hours = cell.served;
          }
        }
      }
      fare_center = best.fare;
      idle_center = best.idle_total;
      // On the shut-zone plateau (no idle vehicles) every fare ties at zero,
      // so the fare coordinate carries no information to zoom on yet.
      if (best.idle_total > 0.0) fare_width /= grid.zoom_factor;
      idle_width /= grid.zoom_factor;
    }
    const double coarse_cell = cap / std::max(1, grid.idle_points - 1);
    best.at_cap = best.idle_total >= cap - coarse_cell;
    if (!best.at_cap || !allow_cap_growth || cap >= 64.0 * base_cap) break;
    cap *= 4.0;
  }
  return best;
}

ZoneSubproblemResult zone_subproblem(int zone, double mu, const NetworkInstance& inst, const BehaviorParams& p,
                                     const GridSpec& grid) {
  const double coefficient = std::min(p.av_cost, mu);
  const ZoneSearchResult found = zone_value_search(zone, coefficient, inst, p, grid);
  ZoneSubproblemResult out;
  out.fare = found.fare;
  out.value = found.value;
  out.at_cap = found.at_cap;
  // The Lagrangian is linear in the idle split at a fixed total, so the
  // cheaper type takes everything; AVs win ties.
  if (mu < p.av_cost) {
    out.idle_human = found.idle_total;
  } else {
    out.idle_av = found.idle_total;
  }
  return out;
}

WageSubproblemResult wage_subproblem(double mu, const BehaviorParams& p, double wage_floor, const GridSpec& grid) {
  const double lo0 = std::max(grid.wage_lo, wage_floor);
  if (lo0 > grid.wage_hi)
    throw std::invalid_argument("wage floor exceeds the top of the wage grid");
  WageSubproblemResult best;
  best.value = -infinity();
  double center = 0.5 * (lo0 + grid.wage_hi);
  double width = grid.wage_hi - lo0;
  for (int pass = 0; pass <= grid.zoom_passes; ++pass) {
    const double lo = std::max(lo0, center - 0.5 * width);
    const double hi = std::min(grid.wage_hi, center + 0.5 * width);
    const Vec wages = linspace(lo, hi, grid.wage_points);
    for (int i = 0; i < wages.size(); ++i) {
      const double value = wage_lagrangian_value(mu, wages(i), p);
      if (value > best.value) {
        best.value = value;
        best.wage = wages(i);
      }
    }
    center = best.wage;
    width /= grid.zoom_factor;
  }
  return best;
}

double dual_update(double mu, double supply_residual, double tau, bool regulated) {
  const double next = mu - tau * supply_residual;
  return regulated ? std::max(0.0, next) : next;
}

namespace {

struct DualCandidate {
  double mu;
  double coarse_value;
};

// Chord interpolation table of the zoom-refined zone values over the cost
// coefficient. Zone values are convex in the coefficient, so chords never
// understate them and the resulting bound stays valid.
class TightZoneTable {
 public:
  TightZoneTable(const NetworkInstance& inst, const BehaviorParams& p, const GridSpec& grid, double lo,
                 double hi, int nodes)
      : inst_(inst), params_(p), grid_(grid), nodes_(linspace(lo, std::max(hi, lo + 1e-9), nodes)) {
    values_.assign(inst.size(), std::vector<double>(nodes_.size(), quiet_nan()));
  }

  double value(int zone, double m) {
    const auto hi_it = std::lower_bound(nodes_.begin(), nodes_.end(), m);
    int hi = static_cast<int>(hi_it - nodes_.begin());
    hi = std::clamp(hi, 1, static_cast<int>(nodes_.size()) - 1);
    const int lo = hi - 1;
    const double v_lo = node_value(zone, lo);
    const double v_hi = node_value(zone, hi);
    const double t = std::clamp((m - nodes_(lo)) / (nodes_(hi) - nodes_(lo)), 0.0, 1.0);
    return (1.0 - t) * v_lo + t * v_hi;
  }

 private:
  double node_value(int zone, int k) {
    double& slot = values_[zone][k];
    if (std::isnan(slot)) slot = zone_value_search(zone, nodes_(k), inst_, params_, grid_).value;
    return slot;
  }
  const NetworkInstance& inst_;
  const BehaviorParams& params_;
  const GridSpec& grid_;
  Vec nodes_;
  std::vector<std::vector<double>> values_;
};

}  // namespace

RelaxedSolution run_dual(const NetworkInstance& inst, const BehaviorParams& p, const DualConfig& config,
                         bool regulated) {
  const int m = inst.size();
  inst.validate();
  p.validate();
  const GridSpec& grid = config.grid;
  const double wage_floor = regulated ? p.min_wage.value_or(0.0) : 0.0;
  const double q_lo = std::max(grid.wage_lo, wage_floor);
  if (q_lo > grid.wage_hi) throw std::invalid_argument("wage floor exceeds the top of the wage grid");

  std::vector<ZoneGrid> zones;
  zones.reserve(m);
  for (int i = 0; i < m; ++i) zones.push_back(build_zone_grid(i, inst, p, grid));

  const Vec wages = linspace(q_lo, grid.wage_hi, grid.wage_points);
  Vec willing(wages.size());
  for (int i = 0; i < wages.size(); ++i)
    willing(i) = driver_supply(p.driver_pool, wages(i), p.reservation_wage, p.supply_sensitivity);

  RelaxedSolution sol;
  double mu = std::isnan(config.mu0) ? p.reservation_wage : config.mu0;
  double tau0 = config.tau0;
  std::vector<DualCandidate> candidates;

  auto coarse_dual = [&](double mu_k, double& hired_out, double& willing_out) -> double {
    double value = -infinity();
    if (!regulated) {
      const double coeff = std::min(p.av_cost, mu_k);
      double zone_sum = 0.0, hired = 0.0;
      for (int i = 0; i < m; ++i) {
        const auto [v, cell] = zones[i].envelope.max_at(coeff);
        zone_sum += v;
        if (mu_k < p.av_cost) hired += zones[i].idle[cell] + zones[i].served[cell];
      }
      int best_q = 0;
      double best_lq = -infinity();
      for (int i = 0; i < wages.size(); ++i) {
        const double lq = hourly_to_per_minute((mu_k - wages(i)) * willing(i));
        if (lq > best_lq) {
          best_lq = lq;
          best_q = i;
        }
      }
      value = zone_sum + best_lq;
      hired_out = hired;
      willing_out = willing(best_q);
    } else {
      double best = -infinity(), best_hired = 0.0, best_willing = 0.0;
      for (int i = 0; i < wages.size(); ++i) {
        const double coeff = std::min(p.av_cost, wages(i) + mu_k);
        double zone_sum = 0.0, hired = 0.0;
        for (int z = 0; z < m; ++z) {
          const auto [v, cell] = zones[z].envelope.max_at(coeff);
          zone_sum += v;
          if (wages(i) + mu_k < p.av_cost) hired += zones[z].idle[cell] + zones[z].served[cell];
        }
        const double w = hourly_to_per_minute(mu_k * willing(i)) + zone_sum;
        if (w > best) {
          best = w;
          best_hired = hired;
          best_willing = willing(i);
        }
      }
      value = best;
      hired_out = best_hired;
      willing_out = best_willing;
    }
    return value;
  };

  double last_residual = infinity();
  for (int k = 1; k <= config.max_iters; ++k) {
    double hired = 0.0, avail = 0.0;
    const double value = coarse_dual(mu, hired, avail);
    candidates.push_back({mu, value});
    sol.mu_trajectory.push_back(mu);
    sol.iterations = k;

    const double g = avail - hired;
    last_residual = std::abs(g) / std::max(avail, 1.0);
    const bool done = regulated ? (last_residual <= config.primal_tol ||
                                   (mu <= 1e-12 && g >= -config.primal_tol * std::max(avail, 1.0)))
                                : last_residual <= config.primal_tol;
    if (done) {
      sol.feasible = true;
      break;
    }
    if (std::isnan(tau0)) tau0 = (k == 1) ? 0.5 * std::max(std::abs(mu), 1.0) / std::max(std::abs(g), 1e-9) : tau0;
    mu = dual_update(mu, g, tau0 / std::sqrt(static_cast<double>(k)), regulated);
    if (std::abs(mu) > 1e6)
      throw SolverError("dual multiplier diverged; the subgradient step size is too large");
  }
  sol.dual_residual = last_residual;

  // Keep the best few distinct multipliers plus the last iterate, then
  // re-evaluate them with the zoom-refined subproblems; report the tightest.
  std::sort(candidates.begin(), candidates.end(),
            [](const DualCandidate& a, const DualCandidate& b) { return a.coarse_value < b.coarse_value; });
  std::vector<double> finals;
  for (const DualCandidate& c : candidates) {
    const bool seen = std::any_of(finals.begin(), finals.end(),
                                  [&](double v) { return std::abs(v - c.mu) <= 1e-9 * (1.0 + std::abs(v)); });
    if (!seen) finals.push_back(c.mu);
    if (static_cast<int>(finals.size()) >= config.final_candidates) break;
  }
  if (!sol.mu_trajectory.empty()) {
    const double last = sol.mu_trajectory.back();
    if (std::none_of(finals.begin(), finals.end(),
                     [&](double v) { return std::abs(v - last) <= 1e-9 * (1.0 + std::abs(v)); }))
      finals.push_back(last);
  }

  TightZoneTable table(inst, p, grid, std::min(p.av_cost, q_lo), p.av_cost, 33);

  double best_bound = infinity();
  double best_mu = finals.front();
  double best_wage = q_lo;
  for (const double mu_k : finals) {
    double bound, wage_k;
    if (!regulated) {
      double zone_sum = 0.0;
      for (int i = 0; i < m; ++i) zone_sum += zone_subproblem(i, mu_k, inst, p, grid).value;
      const WageSubproblemResult wq = wage_subproblem(mu_k, p, 0.0, grid);
      bound = zone_sum + wq.value;
      wage_k = wq.wage;
    } else {
      double best_w = -infinity(), arg_q = q_lo;
      double center = 0.5 * (q_lo + grid.wage_hi), width = grid.wage_hi - q_lo;
      for (int pass = 0; pass <= grid.zoom_passes; ++pass) {
        const Vec qs = linspace(std::max(q_lo, center - 0.5 * width),
                                std::min(grid.wage_hi, center + 0.5 * width), grid.wage_points);
        for (int i = 0; i < qs.size(); ++i) {
          double w = hourly_to_per_minute(
              mu_k * driver_supply(p.driver_pool, qs(i), p.reservation_wage, p.supply_sensitivity));
          for (int z = 0; z < m; ++z) w += table.value(z, std::min(p.av_cost, qs(i) + mu_k));
          if (w > best_w) {
            best_w = w;
            arg_q = qs(i);
          }
        }
        center = arg_q;
        width /= grid.zoom_factor;
      }
      bound = best_w;
      wage_k = arg_q;
    }
    if (bound < best_bound) {
      best_bound = bound;
      best_mu = mu_k;
      best_wage = wage_k;
    }
  }

  // Primal extraction at the bound-minimizing multiplier.
  sol.upper_bound = best_bound;
  sol.mu_best = best_mu;
  sol.decision.fare = Vec::Zero(m);
  sol.decision.idle_av = Vec::Zero(m);
  sol.idle_human = Vec::Zero(m);
  sol.decision.wage = best_wage;
  const double split_coeff = regulated ? best_wage + best_mu : best_mu;
  double hired = 0.0;
  for (int i = 0; i < m; ++i) {
    const double coeff = std::min(p.av_cost, split_coeff);
    const ZoneSearchResult zr = zone_value_search(i, coeff, inst, p, grid);
    sol.decision.fare(i) = zr.fare;
    sol.any_zone_at_cap = sol.any_zone_at_cap || zr.at_cap;
    if (split_coeff < p.av_cost) {
      sol.idle_human(i) = zr.idle_total;
      hired += zr.idle_total + zr.served_hours;
    } else {
      sol.decision.idle_av(i) = zr.idle_total;
    }
  }
  sol.hired_hours = hired;
  sol.willing_hours = driver_supply(p.driver_pool, best_wage, p.reservation_wage, p.supply_sensitivity);
  sol.decision.hire_fraction =
      regulated ? std::clamp(sol.willing_hours > 0.0 ? hired / sol.willing_hours : 0.0, 0.0, 1.0) : 1.0;
  return sol;
}

}  // namespace ridemix
