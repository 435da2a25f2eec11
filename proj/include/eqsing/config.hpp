#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "eqsing/grid.hpp"
#include "eqsing/model.hpp"

namespace eqsing {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LoadedInstance {
  ProblemInstance inst;
  SpaceTimeGrid grid;
  std::map<std::string, std::string> raw;
};

/// Parses a key = value instance file (see docs/config.md) and finalizes the
/// instance.  Throws ConfigError naming the first missing or malformed key.
LoadedInstance load_instance(const std::string& path);

/// Discount override of the form "family:key=value[,key=value]", e.g.
/// "hyperbolic:k=1", "exponential:gamma=0.3",
/// "mixture:lambda=0.5,g1=0.1,g2=1".
DiscountSpec parse_discount(const std::string& text);

}  // namespace eqsing
