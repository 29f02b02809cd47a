#include <gtest/gtest.h>

#include "rdlab/diagnostics.hpp"
#include "rdlab/scaling.hpp"

using namespace rdlab;

namespace {

ReactionPair pair(std::vector<double> plus, std::vector<double> minus) {
  return ReactionPair{Polynomial{std::move(plus)}, Polynomial{std::move(minus)}};
}

// Preset reaction pairs: (k, ell) = (1, 1), (2, 1), (3, 2).
ReactionPair linear_death() { return pair({0.0}, {0.0, 1.0}); }
ReactionPair quadratic_drift() { return pair({0.0, 1.0}, {0.0, 1.0, 1.0}); }
ReactionPair cubic_drift() { return pair({0.0, 0.0, 1.0}, {0.0, 0.0, 1.0, 1.0}); }

}  // namespace

TEST(DetectOrders, Examples) {
  const auto d = detect_orders(cubic_drift());
  EXPECT_EQ(d.k, 3);
  EXPECT_EQ(d.beta, 1.0);
  EXPECT_EQ(d.ell, 2);
  EXPECT_EQ(d.alpha, 2.0);
  const auto e = detect_orders(linear_death());
  EXPECT_EQ(e.k, 1);
  EXPECT_EQ(e.beta, 1.0);
  EXPECT_EQ(e.ell, 1);
  EXPECT_EQ(e.alpha, 1.0);
  EXPECT_THROW(detect_orders(pair({0.0, 1.0}, {0.0, 1.0})), ZeroReaction);
}

TEST(DetectOrders, Errors) {
  // Net birth: beta < 0, so zero is not attracting.
  EXPECT_THROW(detect_orders(pair({0.0, 2.0}, {0.0, 1.0})), InvalidParameter);
  // F(0) != 0.
  EXPECT_THROW(detect_orders(pair({1.0}, {0.0, 1.0})), InvalidParameter);
  // k < ell needs a decreasing F_- somewhere: F = -z, G = z^2 - ...
  EXPECT_THROW(detect_orders(pair({0.0, -0.5, 1.0}, {0.0, 0.5})), OrderViolation);
  EXPECT_THROW(detect_orders(pair({}, {})), ZeroReaction);
}

TEST(ReactionPair, Validation) {
  EXPECT_NO_THROW(quadratic_drift().validate());
  EXPECT_THROW(pair({0.0, -1.0}, {0.0, 1.0}).validate(), InvalidParameter);
  EXPECT_NO_THROW(pair({0.0, 2.0, -0.001}, {0.0, 1.0}).validate());  // increasing on [0, 100]
  EXPECT_THROW(pair({0.0, NAN}, {0.0, 1.0}).validate(), InvalidParameter);
  EXPECT_TRUE(quadratic_drift().satisfies_growth_condition());
  EXPECT_FALSE(cubic_drift().satisfies_growth_condition());
}

TEST(SolveExponents, Examples) {
  auto e = solve_exponents(1, 1);
  EXPECT_EQ(e.a, Rational(0));
  EXPECT_EQ(e.b, Rational(0));
  e = solve_exponents(2, 1);
  EXPECT_EQ(e.a, Rational(1, 2));
  EXPECT_EQ(e.b, Rational(1, 2));
  e = solve_exponents(3, 2);
  EXPECT_EQ(e.a, Rational(1, 2));
  EXPECT_EQ(e.b, Rational(1));
  EXPECT_THROW(solve_exponents(1, 2), OrderViolation);
  EXPECT_EQ(to_string(Rational(1, 2)), "1/2");
  EXPECT_EQ(to_string(Rational(3)), "3");
}

TEST(SolveExponentsProperty, ExactResidualsAndRange) {
  for (int k = 1; k <= 12; ++k)
    for (int ell = 1; ell <= k; ++ell) {
      const auto e = solve_exponents(k, ell);
      const auto [r1, r2] = e.residuals();
      EXPECT_EQ(r1, Rational(0));
      EXPECT_EQ(r2, Rational(0));
      EXPECT_GE(e.a, Rational(0));
      EXPECT_LT(e.a, Rational(1));
      EXPECT_EQ(e.a, Rational(1) - Rational(1, 1 + k - ell));
    }
}

TEST(RescaledOperators, ZeroIsFixed) {
  for (const auto& r : {linear_death(), quadratic_drift(), cubic_drift()}) {
    const auto ops = rescaled_operators(r, 1000.0, 0.0);
    EXPECT_EQ(ops.drift, 0.0);
    EXPECT_EQ(ops.variance, 0.0);
  }
}

TEST(RescaledOperators, LinearCaseIsExact) {
  const auto r = pair({0.0, 0.25}, {0.0, 1.75});  // beta = 1.5, alpha = 2
  for (double m : {1.0, 7.0, 1e3, 1e9})
    for (double z : {0.1, 0.7, 1.3, 2.0}) {
      const auto ops = rescaled_operators(r, m, z);
      EXPECT_EQ(ops.drift, -1.5 * z);
      EXPECT_EQ(ops.variance, 2.0 * z);
    }
}

TEST(RescaledOperators, QuadraticCaseWithinOnePercent) {
  const auto ops = rescaled_operators(quadratic_drift(), 1e4, 1.0);
  EXPECT_NEAR(ops.drift, -1.0, 0.01);
  EXPECT_NEAR(ops.variance, 2.0, 0.02);
}

TEST(RescaledOperatorsProperty, MonotoneConvergenceOnGrid) {
  for (const auto& r : {linear_death(), quadratic_drift(), cubic_drift()}) {
    const auto e = solve_exponents(r);
    double prev = INFINITY;
    for (double m : {1e2, 1e3, 1e4, 1e5, 1e6}) {
      double worst = 0.0;
      for (int i = 1; i <= 20; ++i) {
        const double z = 0.1 * i;
        const auto ops = rescaled_operators(r, e, m, z);
        worst = std::max(worst, std::abs(ops.drift + e.beta * std::pow(z, e.k)));
        worst = std::max(worst, std::abs(ops.variance - e.alpha * std::pow(z, e.ell)));
      }
      if (std::isinf(prev) || prev > 0.0) EXPECT_LT(worst, prev);
      else EXPECT_EQ(worst, 0.0);
      prev = worst;
    }
    EXPECT_LT(prev, 0.01);
  }
}

TEST(SimulateRescaled, ZeroStartStaysZero) {
  const auto traj = simulate_rescaled(quadratic_drift(), 100, 0.0, 1.0, 0.25, 1, 0);
  EXPECT_EQ(traj.event_count, 0u);
  ASSERT_EQ(traj.values.size(), 5u);
  for (double v : traj.values) EXPECT_EQ(v, 0.0);
}

TEST(SimulateRescaled, PureDeathMeanDecays) {
  for (std::int64_t m : {1, 100}) {
    std::vector<double> terminal;
    for (std::uint64_t i = 0; i < 20'000; ++i)
      terminal.push_back(simulate_rescaled(linear_death(), m, 10.0, 1.0, 0.5, 12, i).values.back());
    const auto st = sample_stats(terminal);
    EXPECT_LE(std::abs(st.mean - 10.0 * std::exp(-1.0)), 4.0 * st.std_err) << "m=" << m;
  }
}

TEST(SimulateRescaled, RescaledVariablesStayOnLattice) {
  const std::int64_t m = 400;
  const auto traj = simulate_rescaled(quadratic_drift(), m, 1.0, 0.5, 0.05, 4, 0);
  EXPECT_EQ(traj.initial_count, 20);  // floor(1 * 400^{1/2})
  for (double v : traj.values) {
    const double steps = v * 20.0;
    EXPECT_NEAR(steps, std::round(steps), 1e-9);
    EXPECT_GE(v, 0.0);
  }
  EXPECT_THROW(simulate_rescaled(pair({0.0, 1.0}, {1.0, 1.0, 1.0}), m, 1.0, 0.5, 0.05, 4, 0),
               InvalidParameter);
}
