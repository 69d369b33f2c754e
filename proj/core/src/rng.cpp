#include "comex/rng.hpp"

#include <cmath>
#include <numbers>

namespace comex {

double Rng::normal() {
  double u1 = uniform01();
  const double u2 = uniform01();
  if (u1 < 1e-300) u1 = 1e-300;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace comex
