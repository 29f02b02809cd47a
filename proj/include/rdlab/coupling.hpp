#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string_view>
#include <vector>

#include "rdlab/ctmc.hpp"
#include "rdlab/parallel.hpp"

namespace rdlab {

/// Pair (eta, xi) with xi >= eta. xi copies births and jumps of eta; on a
/// death of eta it either copies the death or gains a particle instead.
struct CoupledState {
  Configuration eta;
  Configuration xi;
  std::uint64_t transition_counter = 0;  // T^n(t)
  double time = 0.0;
};

/// Threshold (F^- - F^+) / (2 (F^- + F^+)) evaluated before the death.
inline double death_threshold(const SiteRates& r) {
  const double total = r.birth + r.death;
  if (!(total > 0.0)) return 0.0;
  return (r.death - r.birth) / (2.0 * total);
}

/// xi copies a death of eta exactly when u exceeds the threshold.
inline bool xi_copies_death(const SiteRates& r, double u) { return u > death_threshold(r); }

/// Expected rate of change of sum(xi) contributed by one site's reactions:
/// F^+ + F^- (2 theta - 1) = F^+ (F^+ - F^-) / (F^+ + F^-). Jumps contribute 0.
inline double coupled_mass_drift(const SiteRates& r) {
  const double total = r.birth + r.death;
  if (!(total > 0.0)) return 0.0;
  const double theta = std::clamp(death_threshold(r), 0.0, 1.0);
  return r.birth + r.death * (2.0 * theta - 1.0);
}

/// Applies an eta-event to both components. `pre_event_rates` are the reaction
/// rates at the event's site before the event; `u` is the shared uniform
/// consumed for this transition (used only for deaths).
inline void apply_coupled_transition(CoupledState& s, const Event& e, const SiteRates& pre_event_rates,
                                     double u) {
  apply_event(s.eta, e);
  if (e.kind == EventKind::Death && !xi_copies_death(pre_event_rates, u)) {
    ++s.xi[e.from];
  } else {
    apply_event(s.xi, e);
  }
  ++s.transition_counter;
  s.time = e.time;
  for (std::size_t x = 0; x < s.eta.size(); ++x) {
    if (s.xi[x] < s.eta[x])
      throw DominationViolation("coupled configuration lost domination at site " + std::to_string(x));
  }
}

/// Coupled process driven by the eta engine plus one shared uniform per
/// eta-transition.
class CoupledProcess {
 public:
  CoupledProcess(const ModelParams& p, const SiteKernel& kernel, const Configuration& eta0,
                 std::uint64_t seed, std::uint64_t replica)
      : engine_(p, kernel, eta0),
        events_(seed, replica, StreamPurpose::Ctmc),
        uniforms_(seed, replica, StreamPurpose::CouplingUniforms) {
    state_.eta = eta0;
    state_.xi = eta0;
  }

  const CoupledState& state() const { return state_; }
  double total_rate() const { return engine_.total_rate(); }

  Event step() {
    Event e = engine_.draw(events_);
    const SiteRates pre = engine_.reaction_rates(e.from);
    const double u = uniforms_.uniform();
    engine_.apply(e);
    apply_coupled_transition(state_, e, pre, u);
    return e;
  }

 private:
  CtmcEngine engine_;
  RngStream events_;
  RngStream uniforms_;
  CoupledState state_;
};

struct CoupledStepResult {
  Event event;
  CoupledState state;
};

/// Single coupled transition from `state` using the two supplied streams.
inline CoupledStepResult coupled_step(const CoupledState& state, const ModelParams& p,
                                      const SiteKernel& kernel, RngStream& event_rng,
                                      RngStream& uniform_rng) {
  for (std::size_t x = 0; x < state.eta.size(); ++x)
    if (state.xi[x] < state.eta[x]) throw DominationViolation("domination fails on entry");
  CtmcEngine engine(p, kernel, state.eta, state.time);
  const Event e = engine.draw(event_rng);
  const SiteRates pre = engine.reaction_rates(e.from);
  const double u = uniform_rng.uniform();
  CoupledStepResult out{e, state};
  apply_coupled_transition(out.state, e, pre, u);
  return out;
}

struct DominationReport {
  std::uint64_t replicas = 0;
  std::uint64_t violations = 0;
  std::uint64_t excess_decreases = 0;  // times W - S went down
  std::int64_t min_margin = std::numeric_limits<std::int64_t>::max();
  std::uint64_t events = 0;
  std::uint64_t guarded = 0;
};

inline std::int64_t min_site_margin(const CoupledState& s) {
  std::int64_t m = std::numeric_limits<std::int64_t>::max();
  for (std::size_t x = 0; x < s.eta.size(); ++x) m = std::min(m, s.xi[x] - s.eta[x]);
  return m;
}

/// Runs one coupled path to the horizon, checking xi >= eta and that
/// sum(xi) - sum(eta) never decreases.
inline DominationReport domination_run(const ModelParams& p, const SiteKernel& kernel,
                                       const Configuration& eta0, double horizon, std::uint64_t seed,
                                       std::uint64_t replica, std::uint64_t max_events = 100'000'000) {
  DominationReport report;
  report.replicas = 1;
  CoupledProcess proc(p, kernel, eta0, seed, replica);
  report.min_margin = min_site_margin(proc.state());
  std::int64_t excess = 0;
  for (;;) {
    if (!(proc.total_rate() > 0.0)) break;
    if (report.events >= max_events) {
      report.guarded = 1;
      break;
    }
    Event e;
    try {
      e = proc.step();
    } catch (const DominationViolation&) {
      ++report.violations;
      break;
    }
    if (e.time > horizon) break;
    ++report.events;
    const CoupledState& s = proc.state();
    report.min_margin = std::min(report.min_margin, min_site_margin(s));
    const std::int64_t now = total_count(s.xi) - total_count(s.eta);
    if (now < excess) ++report.excess_decreases;
    excess = now;
  }
  return report;
}

inline DominationReport domination_ensemble(const ModelParams& p, const SiteKernel& kernel,
                                            const Configuration& eta0, double horizon,
                                            std::uint64_t replicas, std::uint64_t seed,
                                            unsigned threads,
                                            std::uint64_t max_events = 100'000'000) {
  const auto runs = parallel_map<DominationReport>(replicas, threads, [&](std::size_t i) {
    return domination_run(p, kernel, eta0, horizon, seed, i, max_events);
  });
  DominationReport total;
  for (const auto& r : runs) {
    total.replicas += r.replicas;
    total.violations += r.violations;
    total.excess_decreases += r.excess_decreases;
    total.min_margin = std::min(total.min_margin, r.min_margin);
    total.events += r.events;
    total.guarded += r.guarded;
  }
  return total;
}

enum class PassageOutcome { ExceededCap, HitZero, Guard };

inline std::string_view to_string(PassageOutcome o) {
  switch (o) {
    case PassageOutcome::ExceededCap: return "exceeded_cap";
    case PassageOutcome::HitZero: return "hit_zero";
    case PassageOutcome::Guard: return "guard";
  }
  return "?";
}

struct PassageRecord {
  PassageOutcome outcome = PassageOutcome::Guard;
  double stopping_time = 0.0;
};

struct HittingEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  double bound = 1.0;  // C0 / K
  std::uint64_t exceeded = 0;
  std::uint64_t hit_zero = 0;
  std::uint64_t guarded = 0;
  std::vector<PassageRecord> records;  // per replica
};

/// Binomial estimate of P[exceed before zero] from per-replica outcomes.
/// Guard terminations are excluded from the denominator and reported.
inline HittingEstimate summarize_passages(std::vector<PassageRecord> records, double bound) {
  HittingEstimate est;
  est.bound = bound;
  for (const auto& r : records) {
    switch (r.outcome) {
      case PassageOutcome::ExceededCap: ++est.exceeded; break;
      case PassageOutcome::HitZero: ++est.hit_zero; break;
      case PassageOutcome::Guard: ++est.guarded; break;
    }
  }
  const double decided = static_cast<double>(est.exceeded + est.hit_zero);
  if (decided > 0) {
    est.p_hat = static_cast<double>(est.exceeded) / decided;
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / decided);
  }
  est.records = std::move(records);
  return est;
}

/// Monte Carlo estimate of P[tau_K < hat tau_0] for eta started at eta0, where
/// tau_K is the first time total mass exceeds K and hat tau_0 the first time
/// it is zero.
inline HittingEstimate hitting_bound_estimate(const ModelParams& p, const SiteKernel& kernel,
                                              const Configuration& eta0, double cap,
                                              std::uint64_t replicas, std::uint64_t seed,
                                              unsigned threads,
                                              std::uint64_t max_events = 100'000'000) {
  const double n = static_cast<double>(p.n);
  const double c0 = static_cast<double>(total_count(eta0)) / n;
  if (!(cap > 0.0)) throw InvalidParameter("mass cap K must be > 0");
  if (c0 > cap) throw InvalidParameter("initial mass exceeds K");
  const double cap_count = cap * n;
  auto records = parallel_map<PassageRecord>(replicas, threads, [&](std::size_t i) {
    CtmcEngine engine(p, kernel, eta0);
    RngStream rng(seed, i, StreamPurpose::Ctmc);
    PassageRecord rec;
    if (engine.particle_count() == 0) return PassageRecord{PassageOutcome::HitZero, 0.0};
    for (std::uint64_t events = 0; events < max_events; ++events) {
      const Event e = engine.step(rng);
      if (engine.particle_count() == 0) return PassageRecord{PassageOutcome::HitZero, e.time};
      if (static_cast<double>(engine.particle_count()) > cap_count)
        return PassageRecord{PassageOutcome::ExceededCap, e.time};
    }
    rec.stopping_time = engine.time();
    return rec;
  });
  return summarize_passages(std::move(records), c0 / cap);
}

/// Exact probability that a simple +-1/n walk from s0 exceeds K before 0:
/// gambler's ruin to the first lattice point strictly above K.
inline double gamblers_ruin_exceed_probability(double s0, double cap, std::int64_t n) {
  const double start = std::round(s0 * static_cast<double>(n));
  const double target = std::floor(cap * static_cast<double>(n)) + 1.0;
  return start / target;
}

/// Same estimator applied to a plain symmetric +-1/n walk (one step per unit
/// time). Validates the estimator against the exact gambler's-ruin value.
inline HittingEstimate symmetric_walk_hitting_estimate(double s0, double cap, std::int64_t n,
                                                       std::uint64_t replicas, std::uint64_t seed,
                                                       unsigned threads,
                                                       std::uint64_t max_steps = 100'000'000) {
  const auto start = static_cast<std::int64_t>(std::round(s0 * static_cast<double>(n)));
  const double cap_count = cap * static_cast<double>(n);
  auto records = parallel_map<PassageRecord>(replicas, threads, [&](std::size_t i) {
    RngStream rng(seed, i, StreamPurpose::Walk);
    std::int64_t count = start;
    if (count == 0) return PassageRecord{PassageOutcome::HitZero, 0.0};
    for (std::uint64_t step = 1; step <= max_steps; ++step) {
      count += (rng.next_u64() >> 63) ? 1 : -1;
      if (count == 0) return PassageRecord{PassageOutcome::HitZero, static_cast<double>(step)};
      if (static_cast<double>(count) > cap_count)
        return PassageRecord{PassageOutcome::ExceededCap, static_cast<double>(step)};
    }
    return PassageRecord{PassageOutcome::Guard, static_cast<double>(max_steps)};
  });
  return summarize_passages(std::move(records), s0 / cap);
}

/// CSV report `replica,outcome,stopping_time`.
inline void write_passage_csv(std::ostream& os, const HittingEstimate& est) {
  os << "replica,outcome,stopping_time\r\n";
  for (std::size_t i = 0; i < est.records.size(); ++i)
    os << i << ',' << to_string(est.records[i].outcome) << ','
       << detail::format_g12(est.records[i].stopping_time) << "\r\n";
}

}  // namespace rdlab
