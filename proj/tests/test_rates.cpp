#include <gtest/gtest.h>

#include <random>

#include "rdlab/rates.hpp"

using namespace rdlab;

namespace {

ModelParams params(double alpha, double beta, int k, int ell, std::int64_t n) {
  return ModelParams{alpha, beta, k, ell, n};
}

bool close_rel(double a, double b, double rel) {
  return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST(Rates, BirthRateExamples) {
  EXPECT_DOUBLE_EQ(birth_rate(params(1, 1, 1, 1, 10), 10), 45.0);
  EXPECT_EQ(birth_rate(params(1.3, 0.2, 3, 2, 7), 0), 0.0);
  // k > ell: truncation active above (n alpha / beta)^{1/(k-l)} = 10.
  EXPECT_EQ(birth_rate(params(1, 1, 2, 1, 10), 200), 0.0);
}

TEST(Rates, DeathRateExamples) {
  EXPECT_DOUBLE_EQ(death_rate(params(1, 1, 1, 1, 10), 10), 55.0);
  EXPECT_EQ(death_rate(params(1, 1, 1, 1, 10), 0), 0.0);
  EXPECT_DOUBLE_EQ(death_rate(params(1, 1, 2, 1, 10), 200), 2000.0);
}

TEST(Rates, DriftExamples) {
  EXPECT_DOUBLE_EQ(drift_fn(params(1, 1, 1, 1, 10), 1.0), -1.0);
  EXPECT_EQ(drift_fn(params(1, 1, 1, 1, 10), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(drift_fn(params(1, 1, 2, 1, 10), 20.0), -200.0);
}

TEST(Rates, VarianceExamples) {
  EXPECT_DOUBLE_EQ(variance_gn(params(1, 1, 1, 1, 10), 1.0), 1.0);
  EXPECT_EQ(variance_gn(params(1, 1, 1, 1, 10), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(variance_gn(params(2, 1, 1, 3, 10), 0.5), 0.25);
}

TEST(Rates, ErrorTermExamples) {
  // k == ell and n > beta/alpha: no truncation anywhere.
  const auto p = params(0.5, 2.0, 2, 2, 5);
  for (double z : {0.0, 0.01, 0.3, 1.0, 7.0, 123.0}) EXPECT_EQ(error_term(p, z), 0.0);
  EXPECT_EQ(error_term(params(1, 1, 2, 1, 10), 0.0), 0.0);
  EXPECT_DOUBLE_EQ(error_term(params(1, 1, 2, 1, 10), 20.0), 200.0);
}

TEST(Rates, AdvisoryFlags) {
  EXPECT_TRUE(params(1, 3, 2, 2, 3).truncation_advisory());
  EXPECT_FALSE(params(1, 3, 2, 2, 4).truncation_advisory());
  EXPECT_FALSE(params(1, 3, 2, 1, 1).truncation_advisory());
  EXPECT_TRUE(params(1, 0, 1, 2, 10).outside_theorem());
}

TEST(Rates, ValidationRejectsBadParameters) {
  EXPECT_THROW(params(0, 1, 1, 1, 1).validate(), InvalidParameter);
  EXPECT_THROW(params(1, -1, 1, 1, 1).validate(), InvalidParameter);
  EXPECT_THROW(params(1, 1, 0, 1, 1).validate(), InvalidParameter);
  EXPECT_THROW(params(1, 1, 1, 0, 1).validate(), InvalidParameter);
  EXPECT_THROW(params(1, 1, 1, 1, 0).validate(), InvalidParameter);
  EXPECT_NO_THROW(params(1, 0, 1, 1, 1).validate());
}

TEST(Rates, OverflowIsReported) {
  const auto p = params(1, 1, 30, 30, 1'000'000);
  EXPECT_THROW(birth_rate(p, std::int64_t{1} << 62), OverflowError);
  EXPECT_THROW(drift_fn(p, 1e300), OverflowError);
  EXPECT_THROW(error_term(p, 1e300), OverflowError);
  EXPECT_THROW(variance_gn(p, 1e300), OverflowError);
}

TEST(Rates, BetaZeroSplitsEvenly) {
  const auto p = params(1.5, 0.0, 3, 2, 20);
  const SiteRates r = site_rates(p, 17);
  EXPECT_DOUBLE_EQ(r.birth, r.death);
}

TEST(RatesProperty, RatesNonnegativeAndSumToTotal) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> coef(0.01, 2.0);
  std::uniform_int_distribution<int> order(1, 4), scale(1, 50), count(0, 500);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto p = params(coef(gen), coef(gen), order(gen), order(gen), scale(gen));
    const std::int64_t c = count(gen);
    const SiteRates r = site_rates(p, c);
    EXPECT_GE(r.birth, 0.0);
    EXPECT_GE(r.death, 0.0);
    const double zeta = static_cast<double>(c) / static_cast<double>(p.n);
    const double total = static_cast<double>(p.n * p.n) * p.alpha * std::pow(zeta, p.ell);
    EXPECT_TRUE(close_rel(r.birth + r.death, total, 1e-12));
    EXPECT_EQ(site_rates(p, 0).birth, 0.0);
    EXPECT_EQ(site_rates(p, 0).death, 0.0);
  }
}

TEST(RatesProperty, ErrorVanishesWhereBirthIsNotTruncated) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> coef(0.01, 2.0), z(0.0, 5.0);
  std::uniform_int_distribution<int> order(1, 4), scale(1, 50);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto p = params(coef(gen), coef(gen), order(gen), order(gen), scale(gen));
    const double zeta = z(gen);
    const double n = static_cast<double>(p.n);
    const double up = n * n * p.alpha * std::pow(zeta, p.ell);
    const double down = n * p.beta * std::pow(zeta, p.k);
    if (up > down * (1.0 + 1e-12)) {
      EXPECT_EQ(error_term(p, zeta), 0.0);
    }
  }
}

TEST(RatesProperty, ErrorShrinksWithNOnBoundedRange) {
  // k >= ell: error lives near +infinity, so sup over [0, A] decreases to 0.
  for (auto [k, ell] : {std::pair{2, 1}, std::pair{3, 1}, std::pair{4, 2}, std::pair{2, 2}}) {
    double prev = INFINITY;
    for (std::int64_t n : {10, 100, 1000, 10000}) {
      const auto p = params(1.0, 5.0, k, ell, n);
      double worst = 0.0;
      for (int i = 0; i <= 2000; ++i) worst = std::max(worst, std::abs(error_term(p, 10.0 * i / 2000.0)));
      EXPECT_LE(worst, prev);
      prev = worst;
    }
    EXPECT_EQ(prev, 0.0);
  }
  // k < ell: error confined below (beta/(n alpha))^{1/(l-k)}; sup over all zeta shrinks.
  double prev = INFINITY;
  for (std::int64_t n : {10, 100, 1000, 10000}) {
    const auto p = params(1.0, 1.0, 1, 2, n);
    const double edge = 1.0 / static_cast<double>(n);
    double worst = 0.0;
    for (int i = 0; i <= 4000; ++i) worst = std::max(worst, std::abs(error_term(p, 2.0 * edge * i / 4000.0)));
    for (double zeta : {2.0 * edge, 1.0, 10.0}) EXPECT_EQ(error_term(p, zeta), 0.0);
    EXPECT_LT(worst, prev);
    prev = worst;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(Coefficients, SingleSite) {
  const auto c = discrete_coefficients(params(1, 1, 1, 1, 10), SiteKernel(1), DensityVector{1.0});
  EXPECT_DOUBLE_EQ(c.drift[0], -1.0);
  EXPECT_DOUBLE_EQ(c.covariation(0, 0), 1.0);
}

TEST(Coefficients, ZeroDensity) {
  SiteKernel k({{0, 1, 2}, {1, 0, 1}, {3, 1, 0}});
  const auto c = discrete_coefficients(params(1.2, 0.7, 2, 3, 9), k, DensityVector(3, 0.0));
  for (double b : c.drift) EXPECT_EQ(b, 0.0);
  for (double a : c.covariation.data) EXPECT_EQ(a, 0.0);
  const auto lim = limit_coefficients(1.2, 0.7, 2, 3, k, DensityVector(3, 0.0));
  for (double b : lim.drift) EXPECT_EQ(b, 0.0);
  for (double a : lim.covariation.data) EXPECT_EQ(a, 0.0);
}

TEST(Coefficients, TwoSiteExample) {
  SiteKernel k({{0, 1}, {1, 0}});
  const auto c = discrete_coefficients(params(1, 1, 1, 1, 10), k, DensityVector{1.0, 0.0});
  EXPECT_DOUBLE_EQ(c.drift[0], -2.0);
  EXPECT_DOUBLE_EQ(c.drift[1], 1.0);
  EXPECT_DOUBLE_EQ(c.covariation(0, 1), -0.1);
  EXPECT_DOUBLE_EQ(c.covariation(1, 0), -0.1);
  EXPECT_DOUBLE_EQ(c.covariation(0, 0), 1.1);
  EXPECT_DOUBLE_EQ(c.covariation(1, 1), 0.1);
}

TEST(Coefficients, LimitSingleSite) {
  const auto c = limit_coefficients(1, 1, 1, 1, SiteKernel(1), DensityVector{1.0});
  EXPECT_DOUBLE_EQ(c.drift[0], -1.0);
  EXPECT_DOUBLE_EQ(c.covariation(0, 0), 1.0);
}

TEST(Coefficients, DiscreteMinusLimitIsJumpTermPlusError) {
  SiteKernel k({{0, 1.5, 0.5}, {0.2, 0, 1}, {2, 0.3, 0}});
  const DensityVector z{0.4, 1.7, 3.2};
  for (std::int64_t n : {10, 100, 1000}) {
    const auto p = params(0.8, 1.3, 3, 1, n);
    const auto d = discrete_coefficients(p, k, z);
    const auto l = limit_coefficients(0.8, 1.3, 3, 1, k, z);
    for (std::size_t x = 0; x < 3; ++x) {
      EXPECT_NEAR(d.drift[x] - l.drift[x], error_term(p, z[x]), 1e-9);
      for (std::size_t y = 0; y < 3; ++y) {
        const double flux = x == y ? 0.0 : (k.rate(x, y) * z[x] + k.rate(y, x) * z[y]);
        double expect = -flux / static_cast<double>(n);
        if (x == y) {
          expect = 0.0;
          for (std::size_t w = 0; w < 3; ++w)
            if (w != x) expect += (k.rate(x, w) * z[x] + k.rate(w, x) * z[w]) / static_cast<double>(n);
        }
        EXPECT_NEAR(d.covariation(x, y) - l.covariation(x, y), expect, 1e-12);
      }
    }
  }
}

TEST(Coefficients, DimensionMismatch) {
  EXPECT_THROW(discrete_coefficients(params(1, 1, 1, 1, 1), SiteKernel(2), DensityVector{1.0}),
               DimensionError);
  EXPECT_THROW(limit_coefficients(1, 1, 1, 1, SiteKernel(2), DensityVector{1.0}), DimensionError);
}

TEST(BruteForce, ConstantFunctionIsAnnihilated) {
  SiteKernel k({{0, 1}, {2, 0}});
  const auto p = params(1.1, 0.4, 2, 1, 7);
  const Configuration eta{5, 3};
  auto constant = [](const Configuration&) { return 3.25; };
  EXPECT_EQ(apply_generator_bruteforce(p, k, eta, constant), 0.0);
  EXPECT_EQ(apply_carre_du_champ_bruteforce(p, k, eta, constant), 0.0);
}

TEST(BruteForce, SingleSiteCarreDuChamp) {
  const auto p = params(1, 1, 1, 1, 10);
  EXPECT_NEAR(apply_carre_du_champ_bruteforce(p, SiteKernel(1), Configuration{10}, coordinate_function(0, 10)),
              1.0, 1e-14);
}

TEST(BruteForce, TwoSiteExample) {
  SiteKernel k({{0, 1}, {1, 0}});
  const auto p = params(1, 1, 1, 1, 10);
  const Configuration eta{10, 0};
  EXPECT_NEAR(apply_generator_bruteforce(p, k, eta, coordinate_function(0, 10)), -2.0, 1e-13);
  EXPECT_NEAR(apply_generator_bruteforce(p, k, eta, coordinate_function(1, 10)), 1.0, 1e-13);
  EXPECT_NEAR(apply_carre_du_champ_bruteforce(p, k, eta, coordinate_function(0, 10)), 1.1, 1e-13);
  // L(f_x f_y) = b_x zeta(y) + b_y zeta(x) + a_xy
  EXPECT_NEAR(apply_generator_bruteforce(p, k, eta, product_coordinate_function(0, 1, 10)),
              -2.0 * 0.0 + 1.0 * 1.0 - 0.1, 1e-13);
}

// Generator-oracle equivalence over random tuples.
TEST(BruteForceProperty, CoefficientsMatchEnumeratedGenerator) {
  std::mt19937_64 gen(2024);
  std::uniform_int_distribution<int> sites(1, 4), order(1, 4), scale(1, 20), count(0, 50);
  std::uniform_real_distribution<double> coef(1e-3, 2.0), rate(0.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int v = sites(gen);
    const auto p = params(coef(gen), coef(gen), order(gen), order(gen), scale(gen));
    std::vector<std::vector<double>> m(v, std::vector<double>(v));
    for (auto& row : m)
      for (auto& r : row) r = rate(gen);
    const SiteKernel k(m);
    Configuration eta(v);
    for (auto& c : eta) c = count(gen);
    const DensityVector zeta = to_density(eta, p.n);
    const Coefficients c = discrete_coefficients(p, k, zeta);
    for (int x = 0; x < v; ++x) {
      const double lx = apply_generator_bruteforce(p, k, eta, coordinate_function(x, p.n));
      ASSERT_TRUE(close_rel(c.drift[x], lx, 1e-9)) << "trial " << trial << " b_" << x;
      const double qx = apply_carre_du_champ_bruteforce(p, k, eta, coordinate_function(x, p.n));
      ASSERT_TRUE(close_rel(c.covariation(x, x), qx, 1e-9)) << "trial " << trial << " a_xx";
      for (int y = 0; y < v; ++y) {
        const double lxy = apply_generator_bruteforce(p, k, eta, product_coordinate_function(x, y, p.n));
        const double ly = apply_generator_bruteforce(p, k, eta, coordinate_function(y, p.n));
        const double axy = lxy - zeta[x] * ly - zeta[y] * lx;
        ASSERT_TRUE(close_rel(c.covariation(x, y), axy, 1e-9))
            << "trial " << trial << " a_" << x << y << " " << c.covariation(x, y) << " vs " << axy;
        const double cross = c.drift[x] * zeta[y] + c.drift[y] * zeta[x] + c.covariation(x, y);
        ASSERT_TRUE(close_rel(cross, lxy, 1e-9)) << "trial " << trial;
      }
    }
  }
}

TEST(RateTable, MatchesDirectEvaluation) {
  const auto p = params(0.9, 1.7, 3, 2, 13);
  RateTable table(p);
  for (std::int64_t c : {0, 1, 63, 64, 65, 500, 3, 1000}) {
    EXPECT_EQ(table[c].birth, birth_rate(p, c));
    EXPECT_EQ(table[c].death, death_rate(p, c));
  }
}
