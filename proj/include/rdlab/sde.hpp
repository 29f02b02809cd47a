#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rdlab/ctmc.hpp"
#include "rdlab/graph_kernel.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/rates.hpp"
#include "rdlab/rng.hpp"

namespace rdlab {

/// Limit equation
///   d zeta(x) = [Delta_{V,p} zeta(x) - beta zeta(x)^k] dt + sqrt(alpha zeta(x)^ell) dB^x
/// together with its discretisation settings.
struct SDESpec {
  double alpha = 1.0;
  double beta = 1.0;
  int k = 1;
  int ell = 1;
  SiteKernel kernel;
  DensityVector rho0{1.0};
  double dt = 1e-3;
  double horizon = 1.0;
  double sample_dt = 0.1;
  std::optional<double> mass_guard;  // A: report when total mass exceeds it

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw InvalidParameter("alpha must be >= 0");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidParameter("beta must be >= 0");
    if (k < 1 || ell < 1) throw InvalidParameter("k and ell must be >= 1");
    if (rho0.size() != kernel.site_count()) throw DimensionError("rho0 length does not match kernel");
    if (!(dt > 0.0)) throw InvalidParameter("dt must be > 0");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidParameter("horizon must be > 0");
    if (dt > horizon) throw InvalidParameter("dt exceeds the horizon");
    if (!(sample_dt > 0.0)) throw InvalidParameter("sample_dt must be > 0");
  }

  /// True when beta A^k dt >= 1 for the configured mass guard A.
  bool stability_advisory() const {
    return mass_guard && beta * detail::ipow(*mass_guard, k) * dt >= 1.0;
  }
};

/// One full-truncation Euler-Maruyama step: coefficients are evaluated at
/// zeta_+ = max(zeta, 0) while the state itself is left unclamped.
inline std::vector<double> em_step(std::span<const double> state, const SDESpec& spec,
                                   std::span<const double> gaussians, double h) {
  const std::size_t v = state.size();
  if (v != spec.kernel.site_count() || gaussians.size() != v)
    throw DimensionError("state or noise length does not match kernel");
  std::vector<double> pos(v);
  for (std::size_t x = 0; x < v; ++x) pos[x] = std::max(state[x], 0.0);
  std::vector<double> next = discrete_laplacian(spec.kernel, pos);
  const double sqrt_h = std::sqrt(h);
  for (std::size_t x = 0; x < v; ++x) {
    const double drift = next[x] - spec.beta * detail::ipow(pos[x], spec.k);
    const double diffusion = std::sqrt(spec.alpha * detail::ipow(pos[x], spec.ell));
    next[x] = state[x] + drift * h + diffusion * sqrt_h * gaussians[x];
    if (!std::isfinite(next[x])) throw NonFiniteError("SDE state became non-finite");
  }
  return next;
}

inline std::vector<double> em_step(std::span<const double> state, const SDESpec& spec,
                                   std::span<const double> gaussians) {
  return em_step(state, spec, gaussians, spec.dt);
}

struct SamplePath {
  std::vector<double> sample_times;
  std::vector<std::vector<double>> states;  // reported values max(zeta, 0)
  std::vector<double> terminal;             // reported value at the horizon
  /// C_T of the linear martingale transform C' = (I + h A) C + noise with
  /// A = Delta - beta I. Mean zero for every k; for k = 1 the difference
  /// terminal - C_T has the same mean as terminal and far smaller variance.
  std::vector<double> control_variate;
  bool guard_excursion = false;
};

inline SamplePath simulate_path(const SDESpec& spec, std::uint64_t seed, std::uint64_t replica) {
  const std::size_t v = spec.kernel.site_count();
  std::vector<RngStream> noise;
  noise.reserve(v);
  for (std::size_t x = 0; x < v; ++x) noise.emplace_back(seed, replica, StreamPurpose::SdeNoise, x);

  const std::vector<double> grid = sample_grid(spec.horizon, spec.sample_dt);
  SamplePath path;
  std::vector<double> state(spec.rho0.vector());
  std::vector<double> cv(v, 0.0);
  std::vector<double> g(v);
  auto reported = [&] {
    std::vector<double> r(v);
    for (std::size_t x = 0; x < v; ++x) r[x] = std::max(state[x], 0.0);
    return r;
  };
  double t = 0.0;
  std::size_t next = 0;
  const double tol = 1e-9 * spec.dt;
  auto record = [&] {
    while (next < grid.size() && grid[next] <= t + tol) {
      path.sample_times.push_back(grid[next]);
      path.states.push_back(reported());
      ++next;
    }
  };
  record();
  while (t < spec.horizon - tol) {
    const double h = std::min(spec.dt, spec.horizon - t);
    for (std::size_t x = 0; x < v; ++x) g[x] = noise[x].normal();
    std::vector<double> pos(v);
    for (std::size_t x = 0; x < v; ++x) pos[x] = std::max(state[x], 0.0);
    // Linear transform of the same noise increments.
    std::vector<double> lin = discrete_laplacian(spec.kernel, cv);
    const double sqrt_h = std::sqrt(h);
    for (std::size_t x = 0; x < v; ++x) {
      const double dw = std::sqrt(spec.alpha * detail::ipow(pos[x], spec.ell)) * sqrt_h * g[x];
      cv[x] += (lin[x] - spec.beta * cv[x]) * h + dw;
    }
    state = em_step(state, spec, g, h);
    t = (h == spec.dt) ? t + h : spec.horizon;
    if (spec.mass_guard) {
      double mass = 0.0;
      for (double z : state) mass += std::max(z, 0.0);
      if (mass > *spec.mass_guard) path.guard_excursion = true;
    }
    record();
  }
  t = spec.horizon;
  record();
  path.terminal = reported();
  path.control_variate = cv;
  return path;
}

struct SdeEnsemble {
  std::vector<SamplePath> paths;
  std::uint64_t guard_excursions = 0;
};

inline SdeEnsemble simulate_paths(const SDESpec& spec, std::uint64_t replicas, std::uint64_t seed,
                                  unsigned threads) {
  spec.validate();
  SdeEnsemble out;
  out.paths = parallel_map<SamplePath>(replicas, threads,
                                       [&](std::size_t i) { return simulate_path(spec, seed, i); });
  for (const auto& p : out.paths) out.guard_excursions += p.guard_excursion ? 1 : 0;
  return out;
}

/// Mean vector and second-moment matrix of the linear (k = ell = 1) equation.
struct LinearMoments {
  std::vector<double> mean;
  Matrix second;
};

/// Solves m' = A m and S' = A S + S A^T + diag(alpha m) + jump_scale * J(m)
/// by classical RK4 at step dt/100, with A = Delta_{V,p} - beta I.
///
/// jump_scale = 0 gives the moments of the SDE. jump_scale = 1/n adds the
/// covariation of particle jumps, J_xy = -(p(x,y) m_x + p(y,x) m_y) off the
/// diagonal and J_xx = sum_y (p(x,y) m_x + p(y,x) m_y), which makes the
/// system exact for the particle model when its error term vanishes.
inline LinearMoments moment_oracle_linear(const SDESpec& spec, double t, double jump_scale = 0.0) {
  if (spec.k != 1 || spec.ell != 1) throw InvalidParameter("moment oracle needs k = ell = 1");
  if (!(t >= 0.0)) throw InvalidParameter("time must be >= 0");
  const std::size_t v = spec.kernel.site_count();
  if (spec.rho0.size() != v) throw DimensionError("rho0 length does not match kernel");
  const SiteKernel& kern = spec.kernel;

  // State layout: [m (v), S (v*v)].
  const std::size_t dim = v + v * v;
  std::vector<double> y(dim, 0.0);
  for (std::size_t x = 0; x < v; ++x) {
    y[x] = spec.rho0[x];
    for (std::size_t z = 0; z < v; ++z) y[v + x * v + z] = spec.rho0[x] * spec.rho0[z];
  }
  Matrix a(v, v);
  for (std::size_t x = 0; x < v; ++x) {
    for (std::size_t z = 0; z < v; ++z) a(x, z) = (x == z) ? 0.0 : kern.rate(z, x);
    a(x, x) = -kern.out_rate(x) - spec.beta;
  }
  auto rhs = [&](const std::vector<double>& s) {
    std::vector<double> d(dim, 0.0);
    for (std::size_t x = 0; x < v; ++x)
      for (std::size_t z = 0; z < v; ++z) d[x] += a(x, z) * s[z];
    for (std::size_t x = 0; x < v; ++x) {
      for (std::size_t z = 0; z < v; ++z) {
        double acc = 0.0;
        for (std::size_t w = 0; w < v; ++w)
          acc += a(x, w) * s[v + w * v + z] + s[v + x * v + w] * a(z, w);
        if (jump_scale != 0.0 && x != z)
          acc -= jump_scale * (kern.rate(x, z) * s[x] + kern.rate(z, x) * s[z]);
        d[v + x * v + z] = acc;
      }
      double diag = spec.alpha * s[x];
      if (jump_scale != 0.0)
        for (std::size_t w = 0; w < v; ++w)
          if (w != x) diag += jump_scale * (kern.rate(x, w) * s[x] + kern.rate(w, x) * s[w]);
      d[v + x * v + x] += diag;
    }
    return d;
  };
  const double h_target = spec.dt / 100.0;
  const auto steps = static_cast<std::size_t>(std::ceil(t / h_target - 1e-9));
  if (steps > 0) {
    const double h = t / static_cast<double>(steps);
    std::vector<double> tmp(dim);
    for (std::size_t i = 0; i < steps; ++i) {
      const auto k1 = rhs(y);
      for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
      const auto k2 = rhs(tmp);
      for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
      const auto k3 = rhs(tmp);
      for (std::size_t j = 0; j < dim; ++j) tmp[j] = y[j] + h * k3[j];
      const auto k4 = rhs(tmp);
      for (std::size_t j = 0; j < dim; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
  }
  LinearMoments out;
  out.mean.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(v));
  out.second = Matrix(v, v);
  std::copy(y.begin() + static_cast<std::ptrdiff_t>(v), y.end(), out.second.data.begin());
  return out;
}

}  // namespace rdlab
