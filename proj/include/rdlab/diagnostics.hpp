#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlab/ctmc.hpp"
#include "rdlab/parallel.hpp"
#include "rdlab/rates.hpp"
#include "rdlab/sde.hpp"

namespace rdlab {

inline constexpr double kDefaultZThreshold = 4.0;

/// Outcome of one statistical check. pass <=> |z| <= threshold.
struct TestReport {
  std::string name;
  double statistic = 0.0;  // estimate under test
  double reference = 0.0;  // value it is compared against
  double std_err = 0.0;
  double z = 0.0;
  double threshold = kDefaultZThreshold;
  bool pass = true;
  std::uint64_t replicas = 0;
  double runtime_seconds = 0.0;
};

struct SampleStats {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
  double std_err = 0.0;
  std::size_t count = 0;
};

inline SampleStats sample_stats(std::span<const double> xs) {
  SampleStats s;
  s.count = xs.size();
  if (xs.empty()) return s;
  // Two-pass for accuracy; order of summation is the index order.
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.variance = ss / static_cast<double>(xs.size() - 1);
    s.std_err = std::sqrt(s.variance / static_cast<double>(xs.size()));
  }
  return s;
}

/// z-test of `estimate` against `reference` with standard error `se`.
/// A zero standard error falls back to exact comparison.
inline TestReport z_test(std::string name, double estimate, double reference, double se,
                         std::uint64_t replicas, double threshold = kDefaultZThreshold) {
  TestReport r;
  r.name = std::move(name);
  r.statistic = estimate;
  r.reference = reference;
  r.std_err = se;
  r.threshold = threshold;
  r.replicas = replicas;
  if (se > 0.0) {
    r.z = (estimate - reference) / se;
    r.pass = std::abs(r.z) <= threshold;
  } else {
    const bool equal = std::abs(estimate - reference) <= 1e-12 * std::max(1.0, std::abs(reference));
    r.z = equal ? 0.0 : std::copysign(INFINITY, estimate - reference);
    r.pass = equal;
  }
  return r;
}

/// Value of a Dynkin-type process M_t = f(zeta_t) - f(zeta_0) - int_0^t g(zeta_s) ds
/// on a trajectory's sample grid, plus the two sides of the quadratic-variation
/// identity for it.
struct MartingaleSeries {
  std::vector<double> times;
  std::vector<double> values;  // M at each grid time; values[0] == 0
  double jump_qv = 0.0;        // sum of squared jumps of M up to the last grid time
  double predicted_qv = 0.0;   // int_0^T (Q f)(zeta_s) ds when a rate is supplied
};

using ConfigFunctional = std::function<double(const Configuration&)>;

/// Replays the event log from the initial configuration, integrating the
/// compensator exactly over each inter-event interval.
inline MartingaleSeries replay_martingale(const Trajectory& traj, const ConfigFunctional& f,
                                          const ConfigFunctional& compensator,
                                          const ConfigFunctional& qv_rate = {}) {
  if (!traj.events) throw InvalidParameter("trajectory carries no event log");
  MartingaleSeries out;
  out.times = traj.sample_times;
  out.values.reserve(out.times.size());
  Configuration eta = traj.initial;
  const double f0 = f(eta);
  double fcur = f0;
  double integral = 0.0;
  double g = compensator(eta);
  double q = qv_rate ? qv_rate(eta) : 0.0;
  double t = 0.0;
  std::size_t next = 0;
  auto emit_until = [&](double t_event, bool inclusive) {
    while (next < out.times.size() &&
           (out.times[next] < t_event || (inclusive && out.times[next] <= t_event))) {
      const double dt = out.times[next] - t;
      out.values.push_back(fcur - f0 - (integral + g * dt));
      ++next;
    }
  };
  const double t_last = out.times.empty() ? 0.0 : out.times.back();
  for (const Event& e : *traj.events) {
    if (e.time > t_last) break;
    emit_until(e.time, false);
    integral += g * (e.time - t);
    out.predicted_qv += q * (e.time - t);
    t = e.time;
    apply_event(eta, e);
    const double fnew = f(eta);
    out.jump_qv += (fnew - fcur) * (fnew - fcur);
    fcur = fnew;
    g = compensator(eta);
    if (qv_rate) q = qv_rate(eta);
  }
  emit_until(t_last, true);
  out.predicted_qv += q * (t_last - t);
  return out;
}

namespace detail {

inline double laplacian_at(const SiteKernel& kernel, const Configuration& eta, std::size_t x, double n) {
  double acc = 0.0;
  for (std::size_t y = 0; y < eta.size(); ++y) {
    if (y == x) continue;
    acc += kernel.rate(y, x) * static_cast<double>(eta[y]) - kernel.rate(x, y) * static_cast<double>(eta[x]);
  }
  return acc / n;
}

// b^n_x at configuration eta.
inline double drift_at(const ModelParams& p, const SiteKernel& kernel, const Configuration& eta, std::size_t x) {
  const double n = static_cast<double>(p.n);
  return laplacian_at(kernel, eta, x, n) + drift_fn(p, static_cast<double>(eta[x]) / n);
}

// a^n_{x,y} at configuration eta.
inline double covariation_at(const ModelParams& p, const SiteKernel& kernel, const Configuration& eta,
                             std::size_t x, std::size_t y) {
  const double n = static_cast<double>(p.n);
  auto zeta = [&](std::size_t s) { return static_cast<double>(eta[s]) / n; };
  if (x != y) return -(kernel.rate(x, y) * zeta(x) + kernel.rate(y, x) * zeta(y)) / n;
  double acc = 0.0;
  for (std::size_t w = 0; w < eta.size(); ++w)
    if (w != x) acc += (kernel.rate(x, w) * zeta(x) + kernel.rate(w, x) * zeta(w)) / n;
  return acc + variance_gn(p, zeta(x));
}

}  // namespace detail

/// M_t = zeta_t(x) - zeta_0(x) - int_0^t b^n_x(zeta_s) ds, with the jump and
/// compensator sides of E[M_T^2] = E[int a^n_{x,x}].
inline MartingaleSeries dynkin_residual(const Trajectory& traj, const ModelParams& p,
                                        const SiteKernel& kernel, std::size_t x) {
  if (x >= kernel.site_count()) throw DimensionError("site index out of range");
  const double n = static_cast<double>(p.n);
  return replay_martingale(
      traj, [x, n](const Configuration& eta) { return static_cast<double>(eta[x]) / n; },
      [&, x](const Configuration& eta) { return detail::drift_at(p, kernel, eta, x); },
      [&, x](const Configuration& eta) { return detail::covariation_at(p, kernel, eta, x, x); });
}

/// M_t for f = zeta(x) zeta(y), compensator b_x zeta(y) + b_y zeta(x) + a_{x,y}.
inline MartingaleSeries pair_residual(const Trajectory& traj, const ModelParams& p,
                                      const SiteKernel& kernel, std::size_t x, std::size_t y) {
  if (x >= kernel.site_count() || y >= kernel.site_count()) throw DimensionError("site index out of range");
  const double n = static_cast<double>(p.n);
  return replay_martingale(
      traj,
      [x, y, n](const Configuration& eta) {
        return (static_cast<double>(eta[x]) / n) * (static_cast<double>(eta[y]) / n);
      },
      [&, x, y, n](const Configuration& eta) {
        return detail::drift_at(p, kernel, eta, x) * static_cast<double>(eta[y]) / n +
               detail::drift_at(p, kernel, eta, y) * static_cast<double>(eta[x]) / n +
               detail::covariation_at(p, kernel, eta, x, y);
      });
}

/// Per-replica terminal values of the martingale diagnostics.
struct MartingaleSample {
  double coordinate = 0.0;  // M_T for f = zeta(x)
  double pair = 0.0;        // M_T for f = zeta(x) zeta(y)
  double jump_qv = 0.0;
  double predicted_qv = 0.0;
  bool guarded = false;
};

struct MartingaleEnsemble {
  std::vector<MartingaleSample> samples;
  std::uint64_t guarded = 0;
};

/// Simulates each replica with an event log, reduces it to terminal
/// martingale values, and drops the log.
inline MartingaleEnsemble martingale_ensemble(const ModelParams& p, const SiteKernel& kernel,
                                              const Configuration& eta0, const SimulationOptions& base,
                                              std::size_t x, std::size_t y, std::uint64_t replicas,
                                              std::uint64_t seed, unsigned threads) {
  SimulationOptions opts = base;
  opts.record_events = true;
  opts.sample_dt = opts.horizon;
  MartingaleEnsemble out;
  out.samples = parallel_map<MartingaleSample>(replicas, threads, [&](std::size_t i) {
    RngStream rng(seed, i, StreamPurpose::Ctmc);
    const Trajectory traj = simulate(p, kernel, eta0, opts, rng);
    MartingaleSample s;
    if (traj.termination == Termination::EventGuard || traj.termination == Termination::MassCapK) {
      s.guarded = true;
      return s;
    }
    const MartingaleSeries m = dynkin_residual(traj, p, kernel, x);
    const MartingaleSeries mp = pair_residual(traj, p, kernel, x, y);
    s.coordinate = m.values.back();
    s.pair = mp.values.back();
    s.jump_qv = m.jump_qv;
    s.predicted_qv = m.predicted_qv;
    return s;
  });
  for (const auto& s : out.samples) out.guarded += s.guarded ? 1 : 0;
  return out;
}

namespace detail {

template <typename Select>
std::vector<double> collect(const MartingaleEnsemble& e, Select&& sel) {
  std::vector<double> v;
  v.reserve(e.samples.size());
  for (const auto& s : e.samples)
    if (!s.guarded) v.push_back(sel(s));
  return v;
}

}  // namespace detail

/// |mean M_T| against 0.
inline TestReport martingale_mean_test(const MartingaleEnsemble& e, bool pair = false,
                                       double threshold = kDefaultZThreshold) {
  const auto v = detail::collect(e, [pair](const MartingaleSample& s) { return pair ? s.pair : s.coordinate; });
  const SampleStats st = sample_stats(v);
  return z_test(pair ? "pair_martingale_mean" : "dynkin_martingale_mean", st.mean, 0.0, st.std_err,
                st.count, threshold);
}

/// Paired z-test of sum of squared jumps of M against int a^n_{x,x} ds.
inline TestReport qv_test(const MartingaleEnsemble& e, double threshold = kDefaultZThreshold) {
  const auto diff = detail::collect(e, [](const MartingaleSample& s) { return s.jump_qv - s.predicted_qv; });
  const auto jumps = detail::collect(e, [](const MartingaleSample& s) { return s.jump_qv; });
  const auto pred = detail::collect(e, [](const MartingaleSample& s) { return s.predicted_qv; });
  const SampleStats d = sample_stats(diff);
  TestReport r = z_test("quadratic_variation", sample_stats(jumps).mean, sample_stats(pred).mean,
                        d.std_err, d.count, threshold);
  if (d.std_err > 0.0) {
    r.z = d.mean / d.std_err;
    r.pass = std::abs(r.z) <= threshold;
  }
  return r;
}

/// z-scores of the sample mean (and optionally the second moment) against an
/// oracle. Both must pass.
inline TestReport moment_compare(std::span<const double> samples, double oracle_mean,
                                 std::optional<double> oracle_second = std::nullopt,
                                 double threshold = kDefaultZThreshold) {
  if (samples.size() < 100) throw InvalidParameter("moment_compare needs at least 100 samples");
  const SampleStats st = sample_stats(samples);
  TestReport r = z_test("moment_mean", st.mean, oracle_mean, st.std_err, st.count, threshold);
  if (oracle_second) {
    std::vector<double> sq(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) sq[i] = samples[i] * samples[i];
    const SampleStats s2 = sample_stats(sq);
    const TestReport second = z_test("moment_second", s2.mean, *oracle_second, s2.std_err, s2.count, threshold);
    if (std::abs(second.z) > std::abs(r.z)) {
      r.name = "moment_mean_and_second";
      r.statistic = second.statistic;
      r.reference = second.reference;
      r.std_err = second.std_err;
      r.z = second.z;
    }
    r.pass = r.pass && second.pass;
  }
  return r;
}

/// Two-sample Kolmogorov-Smirnov statistic sup_t |F_a(t) - F_b(t)|. Ties,
/// including atoms shared by both samples, are stepped through together.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InvalidParameter("ks_distance needs nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < sa.size() && j < sb.size()) {
    const double t = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == t) ++i;
    while (j < sb.size() && sb[j] == t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Typical two-sample KS fluctuation at the 95% level, 1.36 sqrt((na+nb)/(na nb)).
inline double ks_noise_floor(std::size_t na, std::size_t nb) {
  const double a = static_cast<double>(na);
  const double b = static_cast<double>(nb);
  return 1.36 * std::sqrt((a + b) / (a * b));
}

/// Largest |error_n| over the lattice points 0, 1/n, ..., max_count/n.
inline double max_error_on_range(const ModelParams& p, std::int64_t max_count) {
  double worst = 0.0;
  for (std::int64_t c = 0; c <= max_count; ++c)
    worst = std::max(worst, std::abs(error_term(p, static_cast<double>(c) / static_cast<double>(p.n))));
  return worst;
}

struct SweepRow {
  std::int64_t n = 0;
  double mean = 0.0;
  double std_err = 0.0;
  double mean_z = 0.0;
  double ks = 0.0;
  double max_error = 0.0;
  std::uint64_t events = 0;
  std::uint64_t guarded = 0;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  double reference_mean = 0.0;     // oracle mean (linear case) or SDE mean
  double reference_std_err = 0.0;  // 0 for the oracle
  bool oracle_reference = false;
  double ks_noise = 0.0;
  std::size_t site = 0;
  double runtime_seconds = 0.0;

  /// KS(n_{i+1}) <= KS(n_i) + ks_noise for every consecutive pair.
  bool ks_nonincreasing_within_noise() const {
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i].ks > rows[i - 1].ks + ks_noise) return false;
    return true;
  }
};

struct SweepSettings {
  std::vector<std::int64_t> n_values;
  std::uint64_t replicas = 10'000;      // CTMC replicas per n
  std::uint64_t sde_replicas = 10'000;  // SDE paths
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::size_t site = 0;
  std::uint64_t max_events = 100'000'000;
};

/// Runs the particle system at each n and the limit SDE once, comparing the
/// terminal marginal at `site`: mean z-score and two-sample KS.
inline SweepResult convergence_sweep(const ModelParams& base, const SDESpec& sde, const SweepSettings& s) {
  const auto start = std::chrono::steady_clock::now();
  sde.validate();
  if (s.site >= sde.kernel.site_count()) throw DimensionError("site index out of range");
  SweepResult result;
  result.site = s.site;

  SDESpec terminal_only = sde;
  terminal_only.sample_dt = sde.horizon;
  const SdeEnsemble ens = simulate_paths(terminal_only, s.sde_replicas, s.seed, s.threads);
  std::vector<double> sde_terminal;
  sde_terminal.reserve(ens.paths.size());
  for (const auto& path : ens.paths) sde_terminal.push_back(path.terminal[s.site]);
  const SampleStats sde_stats = sample_stats(sde_terminal);

  const bool linear = base.k == 1 && base.ell == 1;
  if (linear) {
    result.oracle_reference = true;
    result.reference_mean = moment_oracle_linear(sde, sde.horizon).mean[s.site];
  } else {
    result.reference_mean = sde_stats.mean;
    result.reference_std_err = sde_stats.std_err;
  }

  for (std::int64_t n : s.n_values) {
    ModelParams p = base;
    p.n = n;
    p.validate();
    const Configuration eta0 = initial_configuration(sde.rho0, n);
    SimulationOptions opts;
    opts.horizon = sde.horizon;
    opts.sample_dt = sde.horizon;
    opts.guards.max_events = s.max_events;
    struct Out {
      double value = 0.0;
      std::uint64_t events = 0;
      std::int64_t max_count = 0;
      bool guarded = false;
    };
    const auto outs = parallel_map<Out>(s.replicas, s.threads, [&](std::size_t i) {
      RngStream rng(s.seed, i, StreamPurpose::Ctmc);
      const Trajectory traj = simulate(p, sde.kernel, eta0, opts, rng);
      Out o;
      o.events = traj.event_count;
      o.max_count = traj.max_site_count;
      o.guarded = traj.termination == Termination::EventGuard;
      o.value = traj.densities.back()[s.site];
      return o;
    });
    SweepRow row;
    row.n = n;
    std::vector<double> values;
    values.reserve(outs.size());
    std::int64_t max_count = 0;
    for (const auto& o : outs) {
      row.events += o.events;
      if (o.guarded) {
        ++row.guarded;
        continue;
      }
      values.push_back(o.value);
      max_count = std::max(max_count, o.max_count);
    }
    const SampleStats st = sample_stats(values);
    row.mean = st.mean;
    row.std_err = st.std_err;
    const double se = std::sqrt(st.std_err * st.std_err + result.reference_std_err * result.reference_std_err);
    row.mean_z = se > 0.0 ? (st.mean - result.reference_mean) / se : 0.0;
    row.ks = ks_distance(values, sde_terminal);
    row.max_error = max_error_on_range(p, max_count);
    result.rows.push_back(row);
  }
  result.ks_noise = ks_noise_floor(s.replicas, s.sde_replicas);
  result.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace rdlab
