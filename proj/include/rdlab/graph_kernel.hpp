#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rdlab/error.hpp"

namespace rdlab {

/// Nonnegative mass per site. Entries are finite and >= 0.
class DensityVector {
 public:
  DensityVector() = default;
  explicit DensityVector(std::size_t sites, double fill = 0.0)
      : values_(sites, fill) {
    validate();
  }
  explicit DensityVector(std::vector<double> values) : values_(std::move(values)) {
    validate();
  }
  DensityVector(std::initializer_list<double> values) : values_(values) {
    validate();
  }

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t x) const { return values_[x]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  bool operator==(const DensityVector&) const = default;

 private:
  void validate() const {
    for (double v : values_) {
      if (!std::isfinite(v)) throw NonFiniteError("density entry is not finite");
      if (v < 0.0) throw InvalidParameter("density entry is negative");
    }
  }

  std::vector<double> values_;
};

/// Finite site set V = {0, ..., site_count-1} with per-particle jump rates
/// p(x, y). Stored densely, row-major, with a zero diagonal.
class SiteKernel {
 public:
  SiteKernel() : SiteKernel(1) {}

  /// Kernel with no jumps on `sites` sites.
  explicit SiteKernel(std::size_t sites) : sites_(sites), rates_(sites * sites, 0.0) {
    if (sites == 0) throw InvalidParameter("kernel needs at least one site");
    finish();
  }

  /// Build from a square matrix. Diagonal entries are dropped.
  explicit SiteKernel(const std::vector<std::vector<double>>& matrix,
                      std::vector<std::string> names = {})
      : sites_(matrix.size()), names_(std::move(names)) {
    if (sites_ == 0) throw InvalidParameter("kernel needs at least one site");
    if (!names_.empty() && names_.size() != sites_)
      throw DimensionError("site name table does not match kernel size");
    rates_.reserve(sites_ * sites_);
    for (std::size_t x = 0; x < sites_; ++x) {
      if (matrix[x].size() != sites_) throw DimensionError("kernel matrix is not square");
      for (std::size_t y = 0; y < sites_; ++y) {
        const double r = matrix[x][y];
        if (!std::isfinite(r)) throw NonFiniteError("kernel rate is not finite");
        if (r < 0.0) throw InvalidParameter("kernel rate is negative");
        rates_.push_back(x == y ? 0.0 : r);
      }
    }
    finish();
  }

  /// All-ones kernel on the complete graph: recovers the unweighted graph
  /// Laplacian sum_{y != x} (zeta(y) - zeta(x)).
  static SiteKernel complete(std::size_t sites, double rate = 1.0) {
    std::vector<std::vector<double>> m(sites, std::vector<double>(sites, rate));
    return SiteKernel(m);
  }

  /// Symmetric nearest-neighbour ring.
  static SiteKernel ring(std::size_t sites, double rate = 1.0) {
    std::vector<std::vector<double>> m(sites, std::vector<double>(sites, 0.0));
    if (sites > 1) {
      for (std::size_t x = 0; x < sites; ++x) {
        m[x][(x + 1) % sites] = rate;
        m[(x + 1) % sites][x] = rate;
      }
    }
    return SiteKernel(m);
  }

  std::size_t site_count() const { return sites_; }
  double rate(std::size_t x, std::size_t y) const { return rates_[x * sites_ + y]; }
  std::span<const double> row(std::size_t x) const {
    return {rates_.data() + x * sites_, sites_};
  }
  /// sum_y p(x, y)
  double out_rate(std::size_t x) const { return out_rates_[x]; }
  const std::vector<std::string>& names() const { return names_; }

  std::vector<std::vector<double>> matrix() const {
    std::vector<std::vector<double>> m(sites_, std::vector<double>(sites_));
    for (std::size_t x = 0; x < sites_; ++x)
      for (std::size_t y = 0; y < sites_; ++y) m[x][y] = rate(x, y);
    return m;
  }

  bool operator==(const SiteKernel& o) const {
    return sites_ == o.sites_ && rates_ == o.rates_ && names_ == o.names_;
  }

 private:
  void finish() {
    out_rates_.assign(sites_, 0.0);
    for (std::size_t x = 0; x < sites_; ++x)
      for (std::size_t y = 0; y < sites_; ++y) out_rates_[x] += rate(x, y);
  }

  std::size_t sites_;
  std::vector<double> rates_;
  std::vector<double> out_rates_;
  std::vector<std::string> names_;
};

/// Delta_{V,p} zeta(x) = sum_y [p(y,x) zeta(y) - p(x,y) zeta(x)].
/// Accepts signed input so the SDE solver and linear tests can reuse it.
inline std::vector<double> discrete_laplacian(const SiteKernel& kernel,
                                              std::span<const double> zeta) {
  const std::size_t v = kernel.site_count();
  if (zeta.size() != v) throw DimensionError("density length does not match kernel");
  for (double z : zeta)
    if (!std::isfinite(z)) throw NonFiniteError("density entry is not finite");
  std::vector<double> out(v, 0.0);
  // Accumulate each edge flow once into both endpoints so the output sums to 0
  // up to the rounding of a handful of adds.
  for (std::size_t x = 0; x < v; ++x) {
    for (std::size_t y = 0; y < v; ++y) {
      if (x == y) continue;
      const double flow = kernel.rate(x, y) * zeta[x];
      out[x] -= flow;
      out[y] += flow;
    }
  }
  return out;
}

inline std::vector<double> discrete_laplacian(const SiteKernel& kernel,
                                              const DensityVector& zeta) {
  return discrete_laplacian(kernel, zeta.values());
}

inline double total_mass(const DensityVector& zeta) {
  return std::accumulate(zeta.values().begin(), zeta.values().end(), 0.0);
}

}  // namespace rdlab
