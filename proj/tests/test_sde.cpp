#include <gtest/gtest.h>

#include "rdlab/diagnostics.hpp"
#include "rdlab/sde.hpp"

using namespace rdlab;

namespace {

SDESpec single_site(double alpha, double beta, double dt) {
  SDESpec s;
  s.alpha = alpha;
  s.beta = beta;
  s.kernel = SiteKernel(1);
  s.rho0 = DensityVector{1.0};
  s.dt = dt;
  s.horizon = 1.0;
  s.sample_dt = 1.0;
  return s;
}

}  // namespace

TEST(EmStep, NoiselessLinearIterates) {
  for (double dt : {1e-2, 1e-3, 1e-4}) {
    const SDESpec s = single_site(0.0, 1.0, dt);
    std::vector<double> z{1.0};
    const std::vector<double> g{0.0};
    const auto steps = static_cast<int>(std::lround(1.0 / dt));
    for (int i = 0; i < steps; ++i) z = em_step(z, s, g);
    EXPECT_NEAR(z[0], std::exp(-1.0), 2.0 * dt);
  }
}

TEST(EmStep, ZeroIsFixed) {
  const SDESpec s = single_site(1.0, 1.0, 1e-2);
  const std::vector<double> z{0.0}, g{3.0};
  EXPECT_EQ(em_step(z, s, g)[0], 0.0);
}

TEST(EmStep, PureDiffusionConservesMass) {
  SDESpec s = single_site(0.0, 0.0, 1e-2);
  s.kernel = SiteKernel({{0.0, 1.5}, {0.25, 0.0}});
  s.rho0 = DensityVector{1.0, 0.5};
  std::vector<double> z{1.0, 0.5};
  const std::vector<double> g{0.3, -1.2};
  for (int i = 0; i < 1000; ++i) z = em_step(z, s, g);
  EXPECT_NEAR(z[0] + z[1], 1.5, 1e-12);
}

TEST(EmStep, NegativeStateUsesPositivePart) {
  SDESpec s = single_site(1.0, 1.0, 0.01);
  const std::vector<double> z{-0.2}, g{5.0};
  // Drift and diffusion both vanish at zeta_+ = 0; the state is not clamped.
  EXPECT_EQ(em_step(z, s, g)[0], -0.2);
}

TEST(EmStep, Errors) {
  const SDESpec s = single_site(1.0, 1.0, 0.01);
  const std::vector<double> z{1.0, 1.0}, g{0.0, 0.0};
  EXPECT_THROW(em_step(z, s, g), DimensionError);
  const std::vector<double> huge{1e300}, g1{0.0};
  SDESpec cubic = s;
  cubic.k = 3;
  EXPECT_THROW(em_step(huge, cubic, g1), NonFiniteError);
}

TEST(SdeSpec, Validation) {
  SDESpec s = single_site(1.0, 1.0, 0.01);
  EXPECT_NO_THROW(s.validate());
  s.dt = 0.0;
  EXPECT_THROW(s.validate(), InvalidParameter);
  s = single_site(1.0, 1.0, 0.01);
  s.rho0 = DensityVector{1.0, 1.0};
  EXPECT_THROW(s.validate(), DimensionError);
  s = single_site(1.0, 1.0, 0.5);
  s.mass_guard = 10.0;
  EXPECT_TRUE(s.stability_advisory());
  s.dt = 1e-3;
  EXPECT_FALSE(s.stability_advisory());
}

TEST(SimulatePath, DeterministicAndSampledOnGrid) {
  SDESpec s = single_site(1.0, 1.0, 1e-3);
  s.sample_dt = 0.25;
  const auto a = simulate_path(s, 7, 0);
  const auto b = simulate_path(s, 7, 0);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.sample_times, (std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0}));
  EXPECT_EQ(a.states.front()[0], 1.0);
  EXPECT_EQ(a.states.back(), a.terminal);
  for (const auto& row : a.states) EXPECT_GE(row[0], 0.0);
  EXPECT_NE(simulate_path(s, 7, 1).terminal, a.terminal);
}

TEST(SimulatePath, ThreadCountDoesNotChangeResults) {
  SDESpec s = single_site(1.0, 1.0, 1e-2);
  const auto one = simulate_paths(s, 64, 3, 1);
  const auto four = simulate_paths(s, 64, 3, 4);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(one.paths[i].terminal, four.paths[i].terminal);
}

TEST(SimulatePath, MassGuardIsReported) {
  SDESpec s = single_site(1.0, 0.0, 1e-2);
  s.mass_guard = 1.05;
  const auto ens = simulate_paths(s, 200, 1, 1);
  EXPECT_GT(ens.guard_excursions, 0u);
}

TEST(MomentOracle, InitialCondition) {
  SDESpec s = single_site(1.0, 1.0, 1e-3);
  s.kernel = SiteKernel({{0.0, 1.0}, {2.0, 0.0}});
  s.rho0 = DensityVector{1.0, 0.5};
  const auto m = moment_oracle_linear(s, 0.0);
  EXPECT_EQ(m.mean, (std::vector<double>{1.0, 0.5}));
  EXPECT_EQ(m.second(0, 1), 0.5);
  EXPECT_EQ(m.second(1, 1), 0.25);
}

TEST(MomentOracle, SingleSiteClosedForm) {
  const auto m = moment_oracle_linear(single_site(1.0, 1.0, 1e-3), 1.0);
  EXPECT_NEAR(m.mean[0], std::exp(-1.0), 1e-12);
  // E' = -2E + e^{-t}, E(0) = 1  =>  E(t) = e^{-t}.
  EXPECT_NEAR(m.second(0, 0), std::exp(-1.0), 1e-12);
  const auto half = moment_oracle_linear(single_site(0.5, 2.0, 1e-3), 1.0);
  // E' = -4E + 0.5 e^{-2t}  =>  E(t) = 0.25 e^{-2t} + 0.75 e^{-4t}.
  EXPECT_NEAR(half.second(0, 0), 0.25 * std::exp(-2.0) + 0.75 * std::exp(-4.0), 1e-12);
  EXPECT_THROW(moment_oracle_linear([] {
                 auto s = single_site(1.0, 1.0, 1e-3);
                 s.k = 2;
                 return s;
               }(), 1.0),
               InvalidParameter);
}

TEST(MomentOracle, MassConservedWithoutReaction) {
  SDESpec s = single_site(1.0, 0.0, 1e-3);
  s.kernel = SiteKernel({{0.0, 3.0, 1.0}, {0.5, 0.0, 0.0}, {0.0, 2.0, 0.0}});
  s.rho0 = DensityVector{1.0, 0.0, 0.25};
  const auto m = moment_oracle_linear(s, 2.0, 0.01);
  EXPECT_NEAR(m.mean[0] + m.mean[1] + m.mean[2], 1.25, 1e-12);
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(m.second(x, y), m.second(y, x), 1e-12);
}

TEST(SimulatePathsMonteCarlo, MeanAndSecondMomentMatchOracle) {
  const SDESpec s = single_site(1.0, 1.0, 1e-3);
  const auto ens = simulate_paths(s, 20'000, 11, 1);
  std::vector<double> z;
  for (const auto& p : ens.paths) z.push_back(p.terminal[0]);
  const auto oracle = moment_oracle_linear(s, 1.0);
  const auto st = sample_stats(z);
  EXPECT_LE(std::abs(st.mean - oracle.mean[0]), 4.0 * st.std_err + 0.01 * oracle.mean[0]);
  std::vector<double> sq;
  for (double v : z) sq.push_back(v * v);
  const auto s2 = sample_stats(sq);
  EXPECT_LE(std::abs(s2.mean - oracle.second(0, 0)), 4.0 * s2.std_err + 0.01 * oracle.second(0, 0));
}

TEST(SimulatePathsMonteCarlo, ControlVariateHasMeanZero) {
  const SDESpec s = single_site(1.0, 1.0, 1e-2);
  const auto ens = simulate_paths(s, 20'000, 12, 1);
  std::vector<double> c;
  for (const auto& p : ens.paths) c.push_back(p.control_variate[0]);
  const auto st = sample_stats(c);
  EXPECT_LE(std::abs(st.mean), 4.0 * st.std_err);
}
