#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "rdlab/graph_kernel.hpp"

namespace rdlab {

/// Integer particle counts eta(x), one per site.
using Configuration = std::vector<std::int64_t>;

inline std::int64_t total_count(const Configuration& eta) {
  return std::accumulate(eta.begin(), eta.end(), std::int64_t{0});
}

/// zeta = eta / n
inline DensityVector to_density(const Configuration& eta, std::int64_t n) {
  std::vector<double> z(eta.size());
  for (std::size_t x = 0; x < eta.size(); ++x)
    z[x] = static_cast<double>(eta[x]) / static_cast<double>(n);
  return DensityVector(std::move(z));
}

/// count(x) = floor(n * rho0(x)); then |count/n - rho0| < 1/n.
inline Configuration initial_configuration(const DensityVector& rho0, std::int64_t n) {
  if (n < 1) throw InvalidParameter("scale parameter n must be >= 1");
  Configuration eta(rho0.size());
  for (std::size_t x = 0; x < rho0.size(); ++x) {
    const double scaled = std::floor(static_cast<double>(n) * rho0[x]);
    if (scaled > 9.0e18) throw OverflowError("initial count does not fit in 64 bits");
    eta[x] = static_cast<std::int64_t>(scaled);
  }
  return eta;
}

}  // namespace rdlab
