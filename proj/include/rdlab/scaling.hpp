#pragma once

#include <boost/rational.hpp>

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdlab/ctmc.hpp"
#include "rdlab/error.hpp"
#include "rdlab/rng.hpp"

namespace rdlab {

using Rational = boost::rational<std::int64_t>;

inline std::string to_string(const Rational& r) {
  if (r.denominator() == 1) return std::to_string(r.numerator());
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

inline double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

/// Polynomial sum_j c_j z^j over z >= 0; coefficients[j] multiplies z^j.
struct Polynomial {
  std::vector<double> coefficients;

  double operator()(double z) const {
    double acc = 0.0;
    for (auto it = coefficients.rbegin(); it != coefficients.rend(); ++it) acc = acc * z + *it;
    return acc;
  }

  /// Index of the first nonzero coefficient, if any.
  std::optional<int> lowest_order() const {
    for (std::size_t j = 0; j < coefficients.size(); ++j)
      if (coefficients[j] != 0.0) return static_cast<int>(j);
    return std::nullopt;
  }

  int degree() const {
    for (std::size_t j = coefficients.size(); j-- > 0;)
      if (coefficients[j] != 0.0) return static_cast<int>(j);
    return -1;
  }

  double coefficient(std::size_t j) const { return j < coefficients.size() ? coefficients[j] : 0.0; }

  bool operator==(const Polynomial&) const = default;
};

inline Polynomial operator+(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  out.coefficients.resize(std::max(a.coefficients.size(), b.coefficients.size()), 0.0);
  for (std::size_t j = 0; j < out.coefficients.size(); ++j) out.coefficients[j] = a.coefficient(j) + b.coefficient(j);
  return out;
}

inline Polynomial operator-(const Polynomial& a, const Polynomial& b) {
  Polynomial out;
  out.coefficients.resize(std::max(a.coefficients.size(), b.coefficients.size()), 0.0);
  for (std::size_t j = 0; j < out.coefficients.size(); ++j) out.coefficients[j] = a.coefficient(j) - b.coefficient(j);
  return out;
}

/// Birth and death reaction functions F_+ and F_- of a one-site chain.
struct ReactionPair {
  Polynomial f_plus;
  Polynomial f_minus;

  Polynomial net() const { return f_plus - f_minus; }      // F
  Polynomial activity() const { return f_plus + f_minus; }  // G

  /// Finite coefficients, and both functions nondecreasing on [0, inf).
  /// Negative coefficients fall back to a grid check on [0, 100].
  void validate() const {
    for (const Polynomial* poly : {&f_plus, &f_minus}) {
      bool all_nonnegative = true;
      for (double c : poly->coefficients) {
        if (!std::isfinite(c)) throw InvalidParameter("reaction coefficient is not finite");
        if (c < 0.0) all_nonnegative = false;
      }
      if (all_nonnegative) continue;
      double prev = (*poly)(0.0);
      for (int i = 1; i <= 10000; ++i) {
        const double cur = (*poly)(0.01 * i);
        if (cur < prev) throw InvalidParameter("reaction function is not nondecreasing");
        prev = cur;
      }
    }
  }

  /// F_+(z) <= C (1 + z): holds for polynomials exactly when deg F_+ <= 1.
  bool satisfies_growth_condition() const { return f_plus.degree() <= 1; }
};

struct DetectedOrders {
  int k = 0;
  double beta = 0.0;
  int ell = 0;
  double alpha = 0.0;
};

/// k, beta from the first nonzero coefficient of F = F_+ - F_- (as -beta z^k);
/// ell, alpha likewise from G = F_+ + F_- (as alpha z^ell).
inline DetectedOrders detect_orders(const ReactionPair& r) {
  const Polynomial f = r.net();
  const Polynomial g = r.activity();
  const auto k = f.lowest_order();
  const auto ell = g.lowest_order();
  if (!k) throw ZeroReaction("net reaction F = F_+ - F_- is identically zero");
  if (!ell) throw ZeroReaction("total reaction G = F_+ + F_- is identically zero");
  if (*k == 0) throw InvalidParameter("F(0) != 0: zero is not a fixed point");
  DetectedOrders d;
  d.k = *k;
  d.beta = -f.coefficient(static_cast<std::size_t>(*k));
  d.ell = *ell;
  d.alpha = g.coefficient(static_cast<std::size_t>(*ell));
  if (d.k < d.ell) throw OrderViolation("drift order k is below noise order ell");
  if (!(d.beta > 0.0)) throw InvalidParameter("beta <= 0: zero is not attracting");
  if (!(d.alpha > 0.0)) throw InvalidParameter("alpha <= 0");
  return d;
}

/// Space and time exponents (a, b) for the rescaling eta_{t m^b} / m^a.
struct ScalingExponents {
  Rational a;
  Rational b;
  int k = 1;
  int ell = 1;
  double alpha = 0.0;
  double beta = 0.0;

  /// Residuals of b + 1 - a - k(1 - a) = 0 and b + 1 - 2a - ell(1 - a) = 0.
  std::pair<Rational, Rational> residuals() const {
    const Rational one(1);
    return {b + one - a - Rational(k) * (one - a), b + one - Rational(2) * a - Rational(ell) * (one - a)};
  }
};

inline ScalingExponents solve_exponents(int k, int ell) {
  if (ell < 1) throw InvalidParameter("ell must be >= 1");
  if (k < ell) throw OrderViolation("k must be >= ell");
  ScalingExponents e;
  e.k = k;
  e.ell = ell;
  e.a = Rational(k - ell, 1 + k - ell);
  e.b = Rational(k - 1, 1 + k - ell);
  return e;
}

inline ScalingExponents solve_exponents(const ReactionPair& r) {
  const DetectedOrders d = detect_orders(r);
  ScalingExponents e = solve_exponents(d.k, d.ell);
  e.alpha = d.alpha;
  e.beta = d.beta;
  return e;
}

struct RescaledOperators {
  double drift = 0.0;     // L_m zeta^m = m^{b+1-a} F(m^{a-1} zeta)
  double variance = 0.0;  // Q_m zeta^m = m^{b+1-2a} G(m^{a-1} zeta)
};

namespace detail {

// sum_j c_j z^j m^{(a-1) j + shift}, with exponent-0 terms left unscaled.
inline double scaled_sum(const Polynomial& poly, double zeta, double m, const Rational& a,
                         const Rational& shift) {
  double acc = 0.0;
  for (std::size_t j = 0; j < poly.coefficients.size(); ++j) {
    const double c = poly.coefficients[j];
    if (c == 0.0) continue;
    const Rational e = (a - Rational(1)) * Rational(static_cast<std::int64_t>(j)) + shift;
    double term = c * detail::ipow(zeta, static_cast<int>(j));
    if (e != Rational(0)) term *= std::pow(m, to_double(e));
    acc += term;
  }
  if (!std::isfinite(acc)) throw OverflowError("rescaled operator overflows");
  return acc;
}

}  // namespace detail

inline RescaledOperators rescaled_operators(const ReactionPair& r, const ScalingExponents& e,
                                            double m, double zeta) {
  if (!(m >= 1.0)) throw InvalidParameter("m must be >= 1");
  RescaledOperators out;
  out.drift = detail::scaled_sum(r.net(), zeta, m, e.a, e.b + Rational(1) - e.a);
  out.variance = detail::scaled_sum(r.activity(), zeta, m, e.a, e.b + Rational(1) - Rational(2) * e.a);
  return out;
}

inline RescaledOperators rescaled_operators(const ReactionPair& r, double m, double zeta) {
  return rescaled_operators(r, solve_exponents(r), m, zeta);
}

struct ScaledTrajectory {
  std::vector<double> sample_times;
  std::vector<double> values;  // eta_{t m^b} / m^a
  std::uint64_t event_count = 0;
  Termination termination = Termination::Horizon;
  std::int64_t initial_count = 0;
};

/// Birth-death chain on N with rates m F_+(i/m) and m F_-(i/m), observed in
/// rescaled variables zeta_t = eta_{t m^b} / m^a.
inline ScaledTrajectory simulate_rescaled(const ReactionPair& r, std::int64_t m, double zeta0,
                                          double horizon, double sample_dt, std::uint64_t seed,
                                          std::uint64_t replica,
                                          std::uint64_t max_events = 100'000'000) {
  if (m < 1) throw InvalidParameter("m must be >= 1");
  if (r.f_minus.coefficient(0) != 0.0) throw InvalidParameter("F_-(0) must be 0 on N");
  if (!(zeta0 >= 0.0)) throw InvalidParameter("initial value must be >= 0");
  r.validate();
  const ScalingExponents e = solve_exponents(r);
  const double md = static_cast<double>(m);
  const double space = std::pow(md, to_double(e.a));
  const double time_scale = std::pow(md, to_double(e.b));
  const std::vector<double> grid = sample_grid(horizon, sample_dt);

  ScaledTrajectory out;
  out.initial_count = static_cast<std::int64_t>(std::floor(zeta0 * space));
  std::int64_t count = out.initial_count;
  RngStream rng(seed, replica, StreamPurpose::Rescaled);
  double t = 0.0;  // chain time
  std::size_t next = 0;
  auto record_before = [&](double chain_time, bool inclusive) {
    while (next < grid.size() &&
           (grid[next] * time_scale < chain_time || (inclusive && grid[next] * time_scale <= chain_time))) {
      out.sample_times.push_back(grid[next]);
      out.values.push_back(static_cast<double>(count) / space);
      ++next;
    }
  };
  const double end = horizon * time_scale;
  for (;;) {
    const double i_over_m = static_cast<double>(count) / md;
    const double up = md * r.f_plus(i_over_m);
    const double down = count > 0 ? md * r.f_minus(i_over_m) : 0.0;
    const double total = up + down;
    if (!std::isfinite(total)) throw OverflowError("rescaled chain rate overflows");
    if (!(total > 0.0)) {
      out.termination = Termination::AbsorbedAtZero;
      record_before(end, true);
      break;
    }
    if (out.event_count >= max_events) {
      out.termination = Termination::EventGuard;
      break;
    }
    const double t_next = t + rng.exponential(total);
    if (t_next > end) {
      record_before(end, true);
      break;
    }
    record_before(t_next, false);
    t = t_next;
    count += rng.uniform() * total < up ? 1 : -1;
    ++out.event_count;
  }
  return out;
}

}  // namespace rdlab
