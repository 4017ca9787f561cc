#include "ridemix/generate.hpp"

#include <cmath>
#include <random>

namespace ridemix {

namespace {

// Platform-independent uniform double from the raw engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo, double hi) {
    const double u = (engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

struct ZonePlan {
  std::string postal;
  bool remote;
};

// Zone numbering and postal codes of the 19-zone San Francisco layout;
// remote zones sit away from the city core.
const ZonePlan kSanFranciscoZones[19] = {
    {"94104", false}, {"94103", false}, {"94109", false}, {"94115", false}, {"94118", true},
    {"94123", false}, {"94108", false}, {"94121", true},  {"94102", false}, {"94117", false},
    {"94122", true},  {"94114", false}, {"94107", false}, {"94110", false}, {"94131", true},
    {"94116", true},  {"94124", true},  {"94132", true},  {"94112", true},
};

constexpr double kBaseTripMinutes = 4.0;
constexpr double kMinutesPerKm = 1.3;
constexpr double kGravityScaleMinutes = 18.0;
constexpr double kTotalPotentialPerMin = 987.0;  // ~148/min served at a 15% share
constexpr double kOutsideOffset = 14.0;
constexpr double kOutsidePerTripMinute = 1.0;

}  // namespace

InstanceBundle generate_instance(std::uint64_t seed, int zones) {
  if (zones <= 0) throw std::invalid_argument("zone count must be positive");
  Rng rng(seed);
  InstanceBundle bundle;
  NetworkInstance& inst = bundle.instance;

  for (int i = 0; i < zones; ++i) {
    ZoneInfo z;
    z.zone_id = std::to_string(i + 1);
    if (zones == 19) {
      z.postal_code = kSanFranciscoZones[i].postal;
      z.remote = kSanFranciscoZones[i].remote;
    } else {
      z.postal_code = "";
      z.remote = i >= (zones + 1) / 2 + (zones - 1) / 10;  // roughly the last 40%
    }
    inst.zones.push_back(z);
  }

  // Planted coordinates (km): urban cluster near the center, remote ring.
  std::vector<double> x(zones), y(zones), weight(zones);
  for (int i = 0; i < zones; ++i) {
    const bool remote = inst.zones[i].remote;
    const double angle = rng.uniform(0.0, 2.0 * M_PI);
    const double radius = remote ? rng.uniform(4.0, 7.0) : 2.5 * std::sqrt(rng.uniform(0.0, 1.0));
    x[i] = radius * std::cos(angle);
    y[i] = radius * std::sin(angle);
    weight[i] = remote ? rng.uniform(0.8, 1.2) : rng.uniform(3.0, 6.0);
  }

  inst.travel_time = Mat(zones, zones);
  for (int i = 0; i < zones; ++i)
    for (int j = 0; j < zones; ++j) {
      const double dist = std::hypot(x[i] - x[j], y[i] - y[j]);
      inst.travel_time(i, j) = kBaseTripMinutes + kMinutesPerKm * dist;
    }

  Mat demand(zones, zones);
  for (int i = 0; i < zones; ++i)
    for (int j = 0; j < zones; ++j)
      demand(i, j) = weight[i] * weight[j] * std::exp(-inst.travel_time(i, j) / kGravityScaleMinutes);
  demand *= kTotalPotentialPerMin / demand.sum();
  inst.potential_demand = demand;

  inst.outside_cost = Mat(zones, zones);
  for (int i = 0; i < zones; ++i)
    for (int j = 0; j < zones; ++j)
      inst.outside_cost(i, j) = kOutsideOffset + kOutsidePerTripMinute * inst.travel_time(i, j);

  bundle.params = BehaviorParams{};
  inst.validate();
  return bundle;
}

}  // namespace ridemix
