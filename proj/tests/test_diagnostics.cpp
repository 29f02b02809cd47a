#include <gtest/gtest.h>

#include "rdlab/diagnostics.hpp"

using namespace rdlab;

namespace {

SimulationOptions logged(double horizon, double sample_dt) {
  SimulationOptions o;
  o.horizon = horizon;
  o.sample_dt = sample_dt;
  o.record_events = true;
  return o;
}

}  // namespace

TEST(DynkinResidual, ZeroTrajectoryIsZero) {
  const ModelParams p{1.0, 1.0, 1, 1, 10};
  SiteKernel k({{0.0, 1.0}, {1.0, 0.0}});
  RngStream rng(1, 0);
  const auto traj = simulate(p, k, Configuration{0, 0}, logged(1.0, 0.25), rng);
  for (std::size_t x = 0; x < 2; ++x) {
    const auto m = dynkin_residual(traj, p, k, x);
    ASSERT_EQ(m.values.size(), 5u);
    for (double v : m.values) EXPECT_EQ(v, 0.0);
    EXPECT_EQ(m.jump_qv, 0.0);
    EXPECT_EQ(m.predicted_qv, 0.0);
    for (double v : pair_residual(traj, p, k, x, 1 - x).values) EXPECT_EQ(v, 0.0);
  }
}

TEST(DynkinResidual, RequiresEventLog) {
  const ModelParams p{1.0, 1.0, 1, 1, 10};
  RngStream rng(1, 0);
  SimulationOptions o = logged(1.0, 0.5);
  o.record_events = false;
  const auto traj = simulate(p, SiteKernel(1), Configuration{5}, o, rng);
  EXPECT_THROW(dynkin_residual(traj, p, SiteKernel(1), 0), InvalidParameter);
  o.record_events = true;
  RngStream rng2(1, 0);
  EXPECT_THROW(dynkin_residual(simulate(p, SiteKernel(1), Configuration{5}, o, rng2), p, SiteKernel(1), 3),
               DimensionError);
}

TEST(DynkinResidualProperty, ZeroAtTimeZeroAndJumpsOfSizeOneOverN) {
  const ModelParams p{1.0, 0.5, 2, 1, 20};
  SiteKernel k({{0.0, 1.0, 0.5}, {0.2, 0.0, 1.0}, {1.0, 0.0, 0.0}});
  for (std::uint64_t r = 0; r < 50; ++r) {
    RngStream rng(5, r);
    const auto traj = simulate(p, k, Configuration{20, 10, 0}, logged(0.5, 0.1), rng);
    const auto m = dynkin_residual(traj, p, k, 0);
    EXPECT_EQ(m.values.front(), 0.0);
    // Sum of squared jumps of zeta(0) is (number of events touching site 0) / n^2.
    std::size_t touching = 0;
    for (const auto& e : *traj.events)
      if (e.from == 0 || (e.kind == EventKind::Jump && e.to == 0)) ++touching;
    EXPECT_NEAR(m.jump_qv, static_cast<double>(touching) / 400.0, 1e-12);
  }
}

TEST(PairResidual, DiagonalMatchesBruteForceGenerator) {
  const ModelParams p{0.8, 1.2, 2, 1, 15};
  SiteKernel k({{0.0, 1.0}, {2.0, 0.0}});
  RngStream rng(9, 0);
  const auto traj = simulate(p, k, Configuration{15, 8}, logged(0.5, 0.05), rng);
  ASSERT_GT(traj.event_count, 10u);
  for (std::size_t x = 0; x < 2; ++x) {
    const auto f = product_coordinate_function(x, x, p.n);
    const auto direct = pair_residual(traj, p, k, x, x);
    const auto brute = replay_martingale(traj, f, [&](const Configuration& eta) {
      return apply_generator_bruteforce(p, k, eta, f);
    });
    ASSERT_EQ(direct.values.size(), brute.values.size());
    for (std::size_t i = 0; i < direct.values.size(); ++i)
      EXPECT_NEAR(direct.values[i], brute.values[i], 1e-9 * std::max(1.0, std::abs(brute.values[i])));
  }
}

TEST(MartingaleMonteCarlo, SingleSiteLinear) {
  const ModelParams p{1.0, 1.0, 1, 1, 100};
  SimulationOptions o;
  o.horizon = 1.0;
  const auto e = martingale_ensemble(p, SiteKernel(1), Configuration{100}, o, 0, 0, 4000, 21, 1);
  EXPECT_EQ(e.guarded, 0u);
  EXPECT_TRUE(martingale_mean_test(e).pass);
  EXPECT_TRUE(martingale_mean_test(e, true).pass);
  const auto qv = qv_test(e);
  EXPECT_TRUE(qv.pass) << qv.z;
  // Compensator side: int alpha E[zeta_s] ds = 1 - e^{-1}.
  EXPECT_NEAR(qv.reference, 1.0 - std::exp(-1.0), 0.02);
}

TEST(MartingaleMonteCarlo, KernelDominatedCriticalModel) {
  // beta = 0 and a small alpha: the residual is driven almost entirely by jumps.
  const ModelParams p{1e-3, 0.0, 1, 1, 30};
  SiteKernel k({{0.0, 4.0, 1.0}, {0.5, 0.0, 3.0}, {2.0, 0.0, 0.0}});
  SimulationOptions o;
  o.horizon = 1.0;
  const auto e = martingale_ensemble(p, k, Configuration{30, 0, 15}, o, 0, 1, 4000, 22, 1);
  EXPECT_TRUE(martingale_mean_test(e).pass);
  EXPECT_TRUE(martingale_mean_test(e, true).pass);
  EXPECT_TRUE(qv_test(e).pass);
}

TEST(MomentCompare, Calibration) {
  std::vector<double> same(200, 0.5);
  const auto exact = moment_compare(same, 0.5);
  EXPECT_EQ(exact.z, 0.0);
  EXPECT_TRUE(exact.pass);

  RngStream rng(3, 0);
  std::vector<double> xs(10'000);
  for (auto& x : xs) x = rng.normal();
  const auto st = sample_stats(xs);
  EXPECT_TRUE(moment_compare(xs, 0.0, 1.0).pass);
  EXPECT_FALSE(moment_compare(xs, st.mean + 10.0 * st.std_err).pass);
  EXPECT_FALSE(moment_compare(xs, 0.0, 1.5).pass);
  EXPECT_THROW(moment_compare(std::vector<double>(50, 1.0), 1.0), InvalidParameter);
}

TEST(MomentCompare, LinearCtmcAgainstOracle) {
  const ModelParams p{1.0, 1.0, 1, 1, 100};
  SimulationOptions o;
  o.horizon = 1.0;
  o.sample_dt = 1.0;
  std::vector<double> z;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    RngStream rng(31, i);
    z.push_back(simulate(p, SiteKernel(1), Configuration{100}, o, rng).densities.back()[0]);
  }
  SDESpec s;
  s.kernel = SiteKernel(1);
  const auto oracle = moment_oracle_linear(s, 1.0, 1.0 / 100.0);
  EXPECT_TRUE(moment_compare(z, oracle.mean[0], oracle.second(0, 0)).pass);
}

TEST(KsDistance, Examples) {
  const std::vector<double> a{0.1, 0.4, 0.4, 0.9};
  const std::vector<double> b{2.0, 3.0};
  EXPECT_EQ(ks_distance(a, a), 0.0);
  EXPECT_EQ(ks_distance(a, b), 1.0);
  const std::vector<double> c{0.0, 0.0, 0.5, 1.0};
  EXPECT_EQ(ks_distance(a, c), ks_distance(c, a));
  // F_c(0) = 0.5, F_a(0) = 0.
  EXPECT_DOUBLE_EQ(ks_distance(a, c), 0.5);
  EXPECT_THROW(ks_distance(a, std::vector<double>{}), InvalidParameter);
  EXPECT_NEAR(ks_noise_floor(10'000, 10'000), 1.36 * std::sqrt(2e-4), 1e-15);
}

TEST(KsDistanceProperty, SymmetricWithSharedAtoms) {
  RngStream rng(4, 0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> a(30 + trial), b(50);
    for (auto& x : a) x = std::floor(rng.uniform() * 5.0);
    for (auto& x : b) x = std::floor(rng.uniform() * 6.0);
    EXPECT_EQ(ks_distance(a, b), ks_distance(b, a));
    EXPECT_EQ(ks_distance(a, a), 0.0);
    EXPECT_GE(ks_distance(a, b), 0.0);
    EXPECT_LE(ks_distance(a, b), 1.0);
  }
}

TEST(ConvergenceSweep, SingleNEqualsDirectComparison) {
  const ModelParams base{1.0, 1.0, 1, 1, 100};
  SDESpec sde;
  sde.kernel = SiteKernel(1);
  sde.dt = 1e-2;
  SweepSettings s;
  s.n_values = {100};
  s.replicas = 1000;
  s.sde_replicas = 1000;
  s.seed = 5;
  const auto r = convergence_sweep(base, sde, s);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_TRUE(r.oracle_reference);

  SimulationOptions o;
  o.horizon = 1.0;
  o.sample_dt = 1.0;
  std::vector<double> ctmc, ref;
  for (std::uint64_t i = 0; i < 1000; ++i) {
    RngStream rng(5, i, StreamPurpose::Ctmc);
    ctmc.push_back(simulate(base, SiteKernel(1), Configuration{100}, o, rng).densities.back()[0]);
  }
  SDESpec terminal = sde;
  terminal.sample_dt = 1.0;
  for (const auto& path : simulate_paths(terminal, 1000, 5, 1).paths) ref.push_back(path.terminal[0]);
  const auto cmp = moment_compare(ctmc, std::exp(-1.0));
  EXPECT_DOUBLE_EQ(r.rows[0].mean, sample_stats(ctmc).mean);
  EXPECT_NEAR(r.rows[0].mean_z, cmp.z, 1e-9);
  EXPECT_EQ(r.rows[0].ks, ks_distance(ctmc, ref));
  EXPECT_EQ(r.rows[0].max_error, 0.0);
}

TEST(ConvergenceSweep, LinearKsDecreasesWithinNoise) {
  const ModelParams base{1.0, 1.0, 1, 1, 50};
  SDESpec sde;
  sde.kernel = SiteKernel(1);
  sde.dt = 1e-3;
  SweepSettings s;
  s.n_values = {50, 200, 1000};
  s.replicas = 2000;
  s.sde_replicas = 4000;
  s.seed = 6;
  const auto r = convergence_sweep(base, sde, s);
  EXPECT_TRUE(r.ks_nonincreasing_within_noise());
  for (const auto& row : r.rows) EXPECT_LE(std::abs(row.mean_z), 4.0) << row.n;
}

TEST(ConvergenceSweep, QuadraticDriftMeansAgree) {
  const ModelParams base{1.0, 1.0, 2, 1, 100};
  SDESpec sde;
  sde.k = 2;
  sde.kernel = SiteKernel({{0.0, 1.0}, {1.0, 0.0}});
  sde.rho0 = DensityVector{1.0, 0.5};
  sde.horizon = 0.5;
  sde.dt = 1e-3;
  SweepSettings s;
  s.n_values = {100};
  s.replicas = 2000;
  s.sde_replicas = 4000;
  s.seed = 7;
  for (std::size_t site : {0u, 1u}) {
    s.site = site;
    const auto r = convergence_sweep(base, sde, s);
    EXPECT_FALSE(r.oracle_reference);
    EXPECT_LE(std::abs(r.rows[0].mean_z), 4.0) << site;
  }
}
