#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rdlab/configuration.hpp"
#include "rdlab/error.hpp"
#include "rdlab/graph_kernel.hpp"

namespace rdlab {

/// One member (alpha, beta, k, ell, n) of the family of discrete models.
struct ModelParams {
  double alpha = 1.0;  // noise coefficient
  double beta = 1.0;   // drift coefficient
  int k = 1;           // drift order
  int ell = 1;         // noise order
  std::int64_t n = 1;  // scale parameter

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidParameter("alpha must be > 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidParameter("beta must be >= 0");
    if (k < 1) throw InvalidParameter("k must be >= 1");
    if (ell < 1) throw InvalidParameter("ell must be >= 1");
    if (n < 1) throw InvalidParameter("n must be >= 1");
  }

  /// k == ell and n <= beta/alpha: the birth-rate truncation is active at every
  /// positive density.
  bool truncation_advisory() const {
    return k == ell && static_cast<double>(n) <= beta / alpha;
  }

  /// beta == 0 has no restoring drift; the diffusion limit assumes beta > 0.
  bool outside_theorem() const { return beta == 0.0; }

  bool operator==(const ModelParams&) const = default;
};

namespace detail {

inline double ipow(double base, int exponent) {
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

}  // namespace detail

/// Birth and death intensities at one site.
struct SiteRates {
  double birth = 0.0;
  double death = 0.0;
};

/// 2 F_n^+ = max{n^2 alpha zeta^ell - n beta zeta^k, 0},  F_n^- = n^2 alpha zeta^ell - F_n^+.
inline SiteRates rates_at_density(const ModelParams& p, double zeta) {
  const double n = static_cast<double>(p.n);
  const double total = n * n * p.alpha * detail::ipow(zeta, p.ell);
  const double drag = n * p.beta * detail::ipow(zeta, p.k);
  if (!std::isfinite(total) || !std::isfinite(drag))
    throw OverflowError("reaction rate overflows double precision");
  SiteRates r;
  r.birth = std::max(total - drag, 0.0) / 2.0;
  r.death = total - r.birth;
  return r;
}

inline SiteRates site_rates(const ModelParams& p, std::int64_t count) {
  if (count < 0) throw InvalidParameter("particle count is negative");
  return rates_at_density(p, static_cast<double>(count) / static_cast<double>(p.n));
}

inline double birth_rate(const ModelParams& p, std::int64_t count) {
  return site_rates(p, count).birth;
}

inline double death_rate(const ModelParams& p, std::int64_t count) {
  return site_rates(p, count).death;
}

/// F_n = (F_n^+ - F_n^-) / n
inline double drift_fn(const ModelParams& p, double zeta) {
  const SiteRates r = rates_at_density(p, zeta);
  return (r.birth - r.death) / static_cast<double>(p.n);
}

/// G_n = (F_n^+ + F_n^-) / n^2, which is alpha zeta^ell by construction.
inline double variance_gn(const ModelParams& p, double zeta) {
  const double g = p.alpha * detail::ipow(zeta, p.ell);
  if (!std::isfinite(g)) throw OverflowError("variance function overflows");
  return g;
}

/// error_n(zeta) = F_n(zeta) + beta zeta^k. Nonzero only where the birth rate
/// is truncated.
inline double error_term(const ModelParams& p, double zeta) {
  const double n = static_cast<double>(p.n);
  const double total = n * n * p.alpha * detail::ipow(zeta, p.ell);
  const double drag = n * p.beta * detail::ipow(zeta, p.k);
  if (!std::isfinite(total) || !std::isfinite(drag))
    throw OverflowError("reaction rate overflows double precision");
  if (total >= drag) return 0.0;
  // F_n^+ = 0 and F_n^- = total, so F_n = -total/n.
  return -total / n + p.beta * detail::ipow(zeta, p.k);
}

/// Growable per-count table of (F_n^+, F_n^-). One per replica; not shared.
class RateTable {
 public:
  explicit RateTable(const ModelParams& p) : params_(p) { grow(64); }

  const SiteRates& operator[](std::int64_t count) {
    if (count >= static_cast<std::int64_t>(table_.size()))
      grow(std::max<std::int64_t>(count + 1, 2 * static_cast<std::int64_t>(table_.size())));
    return table_[static_cast<std::size_t>(count)];
  }

  const ModelParams& params() const { return params_; }
  std::int64_t size() const { return static_cast<std::int64_t>(table_.size()); }
  const SiteRates* data() const { return table_.data(); }

 private:
  void grow(std::int64_t size) {
    const auto old = static_cast<std::int64_t>(table_.size());
    table_.resize(static_cast<std::size_t>(size));
    for (std::int64_t c = old; c < size; ++c)
      table_[static_cast<std::size_t>(c)] = site_rates(params_, c);
  }

  ModelParams params_;
  std::vector<SiteRates> table_;
};

/// Dense |V| x |V| matrix, row-major.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

/// Drift vector b and covariation matrix a of a generator.
struct Coefficients {
  std::vector<double> drift;
  Matrix covariation;
};

/// Coefficients b^n, a^n of L_n read off the coordinate functions eta(x)/n.
inline Coefficients discrete_coefficients(const ModelParams& p, const SiteKernel& kernel,
                                          const DensityVector& zeta) {
  const std::size_t v = kernel.site_count();
  if (zeta.size() != v) throw DimensionError("density length does not match kernel");
  const double n = static_cast<double>(p.n);
  Coefficients c;
  c.drift = discrete_laplacian(kernel, zeta);
  c.covariation = Matrix(v, v);
  for (std::size_t x = 0; x < v; ++x) {
    c.drift[x] += drift_fn(p, zeta[x]);
    double diag = 0.0;
    for (std::size_t y = 0; y < v; ++y) {
      if (y == x) continue;
      const double flux = kernel.rate(x, y) * zeta[x] + kernel.rate(y, x) * zeta[y];
      c.covariation(x, y) = -flux / n;
      diag += flux / n;
    }
    c.covariation(x, x) = diag + variance_gn(p, zeta[x]);
  }
  return c;
}

/// Coefficients of the limit operator: b* = Delta zeta - beta zeta^k,
/// a* = diag(alpha zeta^ell).
inline Coefficients limit_coefficients(double alpha, double beta, int k, int ell,
                                       const SiteKernel& kernel, const DensityVector& zeta) {
  const std::size_t v = kernel.site_count();
  if (zeta.size() != v) throw DimensionError("density length does not match kernel");
  Coefficients c;
  c.drift = discrete_laplacian(kernel, zeta);
  c.covariation = Matrix(v, v);
  for (std::size_t x = 0; x < v; ++x) {
    const double drag = beta * detail::ipow(zeta[x], k);
    const double noise = alpha * detail::ipow(zeta[x], ell);
    if (!std::isfinite(drag) || !std::isfinite(noise))
      throw OverflowError("limit coefficient overflows");
    c.drift[x] -= drag;
    c.covariation(x, x) = noise;
  }
  return c;
}

namespace detail {

// Visits every transition out of eta as (rate, eta').
template <typename Visitor>
void for_each_transition(const ModelParams& p, const SiteKernel& kernel,
                         const Configuration& eta, Visitor&& visit) {
  const std::size_t v = kernel.site_count();
  if (eta.size() != v) throw DimensionError("configuration length does not match kernel");
  Configuration next = eta;
  for (std::size_t x = 0; x < v; ++x) {
    if (eta[x] < 0) throw InvalidParameter("particle count is negative");
    for (std::size_t y = 0; y < v; ++y) {
      if (x == y) continue;
      const double rate = static_cast<double>(eta[x]) * kernel.rate(x, y);
      if (rate == 0.0) continue;
      --next[x];
      ++next[y];
      visit(rate, static_cast<const Configuration&>(next));
      ++next[x];
      --next[y];
    }
    const SiteRates r = site_rates(p, eta[x]);
    if (r.birth > 0.0) {
      ++next[x];
      visit(r.birth, static_cast<const Configuration&>(next));
      --next[x];
    }
    if (r.death > 0.0 && eta[x] > 0) {
      --next[x];
      visit(r.death, static_cast<const Configuration&>(next));
      ++next[x];
    }
  }
}

}  // namespace detail

/// (L_n f)(eta) by enumerating every one-step transition.
template <typename F>
double apply_generator_bruteforce(const ModelParams& p, const SiteKernel& kernel,
                                  const Configuration& eta, F&& f) {
  const long double base = f(eta);
  long double sum = 0.0L;
  detail::for_each_transition(p, kernel, eta, [&](double rate, const Configuration& next) {
    sum += static_cast<long double>(rate) * (static_cast<long double>(f(next)) - base);
  });
  return static_cast<double>(sum);
}

/// (Q_n f)(eta) = L_n f^2 - 2 f L_n f, enumerated as sum of rate * (df)^2.
template <typename F>
double apply_carre_du_champ_bruteforce(const ModelParams& p, const SiteKernel& kernel,
                                       const Configuration& eta, F&& f) {
  const long double base = f(eta);
  long double sum = 0.0L;
  detail::for_each_transition(p, kernel, eta, [&](double rate, const Configuration& next) {
    const long double d = static_cast<long double>(f(next)) - base;
    sum += static_cast<long double>(rate) * d * d;
  });
  return static_cast<double>(sum);
}

/// f_{x,n}(eta) = eta(x)/n
inline auto coordinate_function(std::size_t x, std::int64_t n) {
  return [x, n](const Configuration& eta) {
    return static_cast<double>(eta[x]) / static_cast<double>(n);
  };
}

/// f_{x,y,n} = f_{x,n} * f_{y,n}
inline auto product_coordinate_function(std::size_t x, std::size_t y, std::int64_t n) {
  return [x, y, n](const Configuration& eta) {
    const double nn = static_cast<double>(n);
    return (static_cast<double>(eta[x]) / nn) * (static_cast<double>(eta[y]) / nn);
  };
}

}  // namespace rdlab
