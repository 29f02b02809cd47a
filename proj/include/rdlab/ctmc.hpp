#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rdlab/configuration.hpp"
#include "rdlab/error.hpp"
#include "rdlab/graph_kernel.hpp"
#include "rdlab/rates.hpp"
#include "rdlab/rng.hpp"

namespace rdlab {

enum class EventKind : std::uint8_t { Jump, Birth, Death };

inline std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::Jump: return "jump";
    case EventKind::Birth: return "birth";
    case EventKind::Death: return "death";
  }
  return "?";
}

/// One transition. Births and deaths use from == to == site.
struct Event {
  EventKind kind = EventKind::Birth;
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  double time = 0.0;

  static Event jump(std::uint32_t from, std::uint32_t to, double t = 0.0) {
    return {EventKind::Jump, from, to, t};
  }
  static Event birth(std::uint32_t site, double t = 0.0) { return {EventKind::Birth, site, site, t}; }
  static Event death(std::uint32_t site, double t = 0.0) { return {EventKind::Death, site, site, t}; }

  /// Same transition, ignoring the time stamp.
  bool same_transition(const Event& o) const {
    return kind == o.kind && from == o.from && to == o.to;
  }
  bool operator==(const Event&) const = default;
};

inline void apply_event(Configuration& eta, const Event& e) {
  switch (e.kind) {
    case EventKind::Jump:
      --eta[e.from];
      ++eta[e.to];
      break;
    case EventKind::Birth:
      ++eta[e.from];
      break;
    case EventKind::Death:
      --eta[e.from];
      break;
  }
}

struct RatedEvent {
  Event event;
  double rate = 0.0;
};

/// Every transition of L_n out of eta with its rate, zero rates included:
/// jumps for each ordered pair x != y, then birth and death per site.
inline std::vector<RatedEvent> event_rates(const ModelParams& p, const SiteKernel& kernel,
                                           const Configuration& eta) {
  const std::size_t v = kernel.site_count();
  if (eta.size() != v) throw DimensionError("configuration length does not match kernel");
  std::vector<RatedEvent> out;
  out.reserve(v * (v + 1));
  for (std::size_t x = 0; x < v; ++x)
    for (std::size_t y = 0; y < v; ++y)
      if (x != y)
        out.push_back({Event::jump(static_cast<std::uint32_t>(x), static_cast<std::uint32_t>(y)),
                       static_cast<double>(eta[x]) * kernel.rate(x, y)});
  for (std::size_t x = 0; x < v; ++x) {
    const SiteRates r = site_rates(p, eta[x]);
    out.push_back({Event::birth(static_cast<std::uint32_t>(x)), r.birth});
    out.push_back({Event::death(static_cast<std::uint32_t>(x)), r.death});
  }
  return out;
}

/// Direct-method simulator for L_n: one exponential waiting time at the total
/// rate, then one categorical pick. Only the sites touched by an event have
/// their rates refreshed.
class CtmcEngine {
 public:
  CtmcEngine(const ModelParams& p, const SiteKernel& kernel, Configuration eta0, double t0 = 0.0)
      : params_(p), kernel_(&kernel), rates_(p), eta_(std::move(eta0)), time_(t0) {
    p.validate();
    if (eta_.size() != kernel.site_count())
      throw DimensionError("configuration length does not match kernel");
    for (auto c : eta_)
      if (c < 0) throw InvalidParameter("particle count is negative");
    site_total_.assign(eta_.size(), 0.0);
    for (std::size_t x = 0; x < eta_.size(); ++x) refresh(x);
    count_ = total_count(eta_);
  }

  const Configuration& state() const { return eta_; }
  double time() const { return time_; }
  std::int64_t particle_count() const { return count_; }
  const ModelParams& params() const { return params_; }
  const SiteKernel& kernel() const { return *kernel_; }

  double total_rate() const {
    if (site_total_.size() == 1) return site_total_[0];
    double total = 0.0;
    for (double s : site_total_) total += s;
    return total;
  }

  SiteRates reaction_rates(std::size_t x) { return rates_[eta_[x]]; }

  /// Samples the next event (time stamped) without applying it.
  /// Draw order: waiting time first, then the event choice.
  Event draw(RngStream& rng) {
    const double total = total_rate();
    if (!(total > 0.0)) throw AbsorbedState("every event rate is zero");
    if (!std::isfinite(total)) throw OverflowError("total event rate is not finite");
    const double t = time_ + rng.exponential(total);
    return choose(rng.uniform() * total, t);
  }

  void apply(const Event& e) {
    time_ = e.time;
    if (e.kind == EventKind::Jump) {
      --eta_[e.from];
      ++eta_[e.to];
      refresh(e.from);
      refresh(e.to);
      return;
    }
    const std::int64_t delta = e.kind == EventKind::Birth ? 1 : -1;
    eta_[e.from] += delta;
    count_ += delta;
    refresh(e.from);
  }

  Event step(RngStream& rng) {
    const Event e = draw(rng);
    apply(e);
    return e;
  }

 private:
  void refresh(std::size_t x) {
    const SiteRates& r = rates_[eta_[x]];
    site_total_[x] = static_cast<double>(eta_[x]) * kernel_->out_rate(x) + r.birth + r.death;
  }

  Event choose(double target, double t) {
    const std::size_t v = eta_.size();
    std::size_t last_live = v;
    for (std::size_t x = 0; x < v; ++x) {
      if (site_total_[x] <= 0.0) continue;
      last_live = x;
      if (target >= site_total_[x]) {
        target -= site_total_[x];
        continue;
      }
      return choose_within(x, target, t);
    }
    // Rounding pushed the target past the last cumulative bound.
    return choose_within(last_live, site_total_[last_live] * (1.0 - 0x1.0p-52), t);
  }

  Event choose_within(std::size_t x, double target, double t) {
    const auto site = static_cast<std::uint32_t>(x);
    const double count = static_cast<double>(eta_[x]);
    const double jump = count * kernel_->out_rate(x);
    const SiteRates& r = rates_[eta_[x]];
    if (target < jump || !(r.birth + r.death > 0.0)) {
      // Pick y proportional to p(x, y).
      double scaled = target / count;
      const auto row = kernel_->row(x);
      std::size_t pick = x;
      for (std::size_t y = 0; y < row.size(); ++y) {
        if (row[y] <= 0.0) continue;
        pick = y;
        if (scaled < row[y]) break;
        scaled -= row[y];
      }
      return Event::jump(site, static_cast<std::uint32_t>(pick), t);
    }
    target -= jump;
    const bool birth = target < r.birth || !(r.death > 0.0);
    return Event{birth ? EventKind::Birth : EventKind::Death, site, site, t};
  }

  ModelParams params_;
  const SiteKernel* kernel_;
  RateTable rates_;
  Configuration eta_;
  std::vector<double> site_total_;
  double time_;
  std::int64_t count_ = 0;
};

struct StepResult {
  Event event;
  Configuration next;
};

/// One transition from eta at time 0; event.time is the waiting time.
inline StepResult step(const ModelParams& p, const SiteKernel& kernel, const Configuration& eta,
                       RngStream& rng) {
  CtmcEngine engine(p, kernel, eta);
  const Event e = engine.step(rng);
  return {e, engine.state()};
}

enum class Termination { Horizon, AbsorbedAtZero, MassCapK, EventGuard };

inline std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Horizon: return "horizon";
    case Termination::AbsorbedAtZero: return "absorbed_at_zero";
    case Termination::MassCapK: return "mass_cap";
    case Termination::EventGuard: return "event_guard";
  }
  return "?";
}

struct SimulationGuards {
  std::optional<double> mass_cap;  // K: stop once total mass exceeds it
  std::uint64_t max_events = 100'000'000;
};

struct SimulationOptions {
  double horizon = 1.0;
  double sample_dt = 0.1;
  SimulationGuards guards;
  bool record_events = false;
  bool fast_paths = true;  // specialised loops with identical output
};

struct FirstPassage {
  std::optional<double> mass_exceeds_cap;  // tau_K
  std::optional<double> hits_zero;         // hat tau_0
};

/// Sampled path of densities zeta_t = eta_t / n on a regular grid, plus
/// bookkeeping needed by the diagnostics.
struct Trajectory {
  ModelParams params;
  std::vector<double> sample_times;
  std::vector<std::vector<double>> densities;  // one row per sample time
  std::uint64_t event_count = 0;
  FirstPassage first_passage;
  Termination termination = Termination::Horizon;
  double end_time = 0.0;
  Configuration initial;
  Configuration final_state;
  std::int64_t max_site_count = 0;
  std::optional<std::vector<Event>> events;
};

/// Grid 0, dt, 2dt, ... up to the horizon, with the horizon itself appended
/// when it is not a grid point.
inline std::vector<double> sample_grid(double horizon, double dt) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidParameter("horizon must be finite and > 0");
  if (!(dt > 0.0)) throw InvalidParameter("sample_dt must be > 0");
  std::vector<double> grid;
  const auto steps = static_cast<std::size_t>(std::floor(horizon / dt + 1e-9));
  grid.reserve(steps + 2);
  for (std::size_t j = 0; j <= steps; ++j) grid.push_back(std::min(static_cast<double>(j) * dt, horizon));
  if (horizon - grid.back() > 1e-12 * horizon) grid.push_back(horizon);
  else grid.back() = horizon;
  return grid;
}

namespace detail {

// Event loop of simulate() for a single site. There are no jumps, so the total
// rate is birth + death. The stream is consumed exactly as CtmcEngine does and
// the result is bit-identical to the general loop.
inline void run_single_site(const ModelParams& p, const std::vector<double>& grid, const SimulationOptions& opts,
                            RngStream& shared_rng, Trajectory& traj) {
  // Local copy keeps the engine state in registers; written back on exit.
  RngStream rng = shared_rng;
  RateTable rates(p);
  const SiteRates* table = rates.data();
  std::int64_t table_size = rates.size();
  const double n = static_cast<double>(p.n);
  const double horizon = opts.horizon;
  const std::uint64_t max_events = opts.guards.max_events;
  const bool capped = opts.guards.mass_cap.has_value();
  const double cap_count = capped ? *opts.guards.mass_cap * n : 0.0;
  const bool logging = opts.record_events;
  std::int64_t c = traj.initial[0];
  std::int64_t max_count = c;
  double t = 0.0;
  std::uint64_t events = 0;
  std::size_t next_sample = 0;
  double next_time = grid.empty() ? INFINITY : grid[0];
  auto record_until = [&](double bound, bool inclusive) {
    while (next_sample < grid.size() && (grid[next_sample] < bound || (inclusive && grid[next_sample] <= bound))) {
      traj.sample_times.push_back(grid[next_sample]);
      traj.densities.push_back({static_cast<double>(c) / n});
      ++next_sample;
    }
    next_time = next_sample < grid.size() ? grid[next_sample] : INFINITY;
  };
  if (c == 0) traj.first_passage.hits_zero = 0.0;
  for (;;) {
    if (c == 0) {
      traj.termination = Termination::AbsorbedAtZero;
      record_until(horizon, true);
      traj.end_time = t;
      break;
    }
    if (events >= max_events) {
      traj.termination = Termination::EventGuard;
      traj.end_time = t;
      break;
    }
    if (c >= table_size) {
      rates[c];
      table = rates.data();
      table_size = rates.size();
    }
    const SiteRates& r = table[c];
    const double total = r.birth + r.death;
    if (!(total > 0.0 && total < INFINITY)) [[unlikely]] {
      if (!(total > 0.0)) throw AbsorbedState("every event rate is zero");
      throw OverflowError("total event rate is not finite");
    }
    const double te = t + rng.exponential(total);
    double target = rng.uniform() * total;
    if (target >= total) target = total * (1.0 - 0x1.0p-52);
    // target < total, so a zero death rate always yields a birth.
    const bool birth = target < r.birth;
    if (te > horizon) {
      traj.termination = Termination::Horizon;
      record_until(horizon, true);
      traj.end_time = horizon;
      break;
    }
    if (next_time < te) record_until(te, false);
    t = te;
    c += 2 * static_cast<std::int64_t>(birth) - 1;
    ++events;
    if (logging) traj.events->push_back(Event{birth ? EventKind::Birth : EventKind::Death, 0, 0, te});
    max_count = std::max(max_count, c);
    if (c == 0) traj.first_passage.hits_zero = te;
    if (capped && static_cast<double>(c) > cap_count) {
      traj.first_passage.mass_exceeds_cap = te;
      traj.termination = Termination::MassCapK;
      traj.end_time = te;
      break;
    }
  }
  traj.event_count = events;
  traj.max_site_count = max_count;
  traj.final_state = Configuration{c};
  shared_rng = rng;
}

}  // namespace detail

/// Exact simulation of L_n from eta0 until the horizon, absorption at zero,
/// the mass cap, or the event guard. Densities are recorded cadlag: the value
/// at grid time t includes every event at times <= t.
inline Trajectory simulate(const ModelParams& p, const SiteKernel& kernel, const Configuration& eta0,
                           const SimulationOptions& opts, RngStream& rng) {
  if (opts.guards.max_events == 0) throw InvalidParameter("max_events must be > 0");
  const std::vector<double> grid = sample_grid(opts.horizon, opts.sample_dt);
  CtmcEngine engine(p, kernel, eta0);
  const double n = static_cast<double>(p.n);

  Trajectory traj;
  traj.params = p;
  traj.initial = eta0;
  traj.sample_times.reserve(grid.size());
  traj.densities.reserve(grid.size());
  if (opts.record_events) traj.events.emplace();
  for (auto c : eta0) traj.max_site_count = std::max(traj.max_site_count, c);
  if (opts.fast_paths && kernel.site_count() == 1) {
    detail::run_single_site(p, grid, opts, rng, traj);
    return traj;
  }

  std::size_t next_sample = 0;
  auto record_until = [&](double t_exclusive, bool inclusive) {
    while (next_sample < grid.size() &&
           (grid[next_sample] < t_exclusive || (inclusive && grid[next_sample] <= t_exclusive))) {
      std::vector<double> row(eta0.size());
      for (std::size_t x = 0; x < row.size(); ++x) row[x] = static_cast<double>(engine.state()[x]) / n;
      traj.sample_times.push_back(grid[next_sample]);
      traj.densities.push_back(std::move(row));
      ++next_sample;
    }
  };
  const bool capped = opts.guards.mass_cap.has_value();
  const double cap_count = capped ? *opts.guards.mass_cap * n : 0.0;
  const std::uint64_t max_events = opts.guards.max_events;
  const double horizon = opts.horizon;
  const bool logging = opts.record_events;
  std::int64_t max_count = traj.max_site_count;

  if (engine.particle_count() == 0) traj.first_passage.hits_zero = 0.0;
  std::uint64_t events = 0;
  for (;;) {
    if (engine.particle_count() == 0) {
      traj.termination = Termination::AbsorbedAtZero;
      record_until(horizon, true);
      traj.end_time = engine.time();
      break;
    }
    if (events >= max_events) {
      traj.termination = Termination::EventGuard;
      traj.end_time = engine.time();
      break;
    }
    const Event e = engine.draw(rng);
    if (e.time > horizon) {
      traj.termination = Termination::Horizon;
      record_until(horizon, true);
      traj.end_time = horizon;
      break;
    }
    if (next_sample < grid.size() && grid[next_sample] < e.time) record_until(e.time, false);
    engine.apply(e);
    ++events;
    if (logging) traj.events->push_back(e);
    // Births and jumps raise the count at e.to; deaths (to == from) cannot set a new maximum.
    max_count = std::max(max_count, engine.state()[e.to]);
    if (engine.particle_count() == 0) traj.first_passage.hits_zero = e.time;
    if (capped && static_cast<double>(engine.particle_count()) > cap_count) {
      traj.first_passage.mass_exceeds_cap = e.time;
      traj.termination = Termination::MassCapK;
      traj.end_time = e.time;
      break;
    }
  }
  traj.event_count = events;
  traj.max_site_count = max_count;
  traj.final_state = engine.state();
  return traj;
}

namespace detail {

inline std::string format_g12(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace detail

/// RFC-4180 CSV: header `t,site_0,...,site_{V-1}`, CRLF line endings,
/// 12 significant digits.
inline void write_density_csv(std::ostream& os, const std::vector<double>& times,
                              const std::vector<std::vector<double>>& rows, std::size_t sites) {
  os << "t";
  for (std::size_t x = 0; x < sites; ++x) os << ",site_" << x;
  os << "\r\n";
  for (std::size_t i = 0; i < times.size(); ++i) {
    os << detail::format_g12(times[i]);
    for (double v : rows[i]) os << ',' << detail::format_g12(v);
    os << "\r\n";
  }
}

inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  write_density_csv(os, traj.sample_times, traj.densities, traj.initial.size());
}

/// One JSON object per line: {"t":..,"kind":..,"from":..,"to":..}.
inline void write_event_log_jsonl(std::ostream& os, const Trajectory& traj) {
  if (!traj.events) return;
  for (const Event& e : *traj.events) {
    os << "{\"t\":" << detail::format_g12(e.time) << ",\"kind\":\"" << to_string(e.kind)
       << "\",\"from\":" << e.from << ",\"to\":" << e.to << "}\n";
  }
}

}  // namespace rdlab
