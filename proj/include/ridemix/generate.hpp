#pragma once

#include "ridemix/instance_io.hpp"
#include "ridemix/types.hpp"

#include <cstdint>

namespace ridemix {

/// Deterministic synthetic instance: zones planted on a plane with an urban
/// cluster and a remote ring, travel times from distances, gravity-style
/// potential demand with urban zones weighted several times heavier, and an
/// outside option whose cost grows with trip length. The 19-zone layout
/// carries the San Francisco postal labels; other sizes get generic ids.
InstanceBundle generate_instance(std::uint64_t seed, int zones = 19);

}  // namespace ridemix
