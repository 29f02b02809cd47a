#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "rdlab/ctmc.hpp"
#include "rdlab/diagnostics.hpp"
#include "rdlab/sde.hpp"

using namespace rdlab;

namespace {

const ModelParams kFeller{1.0, 1.0, 1, 1, 10};

double rate_of(const std::vector<RatedEvent>& rates, const Event& e) {
  for (const auto& r : rates)
    if (r.event.same_transition(e)) return r.rate;
  return -1.0;
}

}  // namespace

TEST(InitialConfiguration, Examples) {
  EXPECT_EQ(initial_configuration(DensityVector{1.0}, 10), (Configuration{10}));
  EXPECT_EQ(initial_configuration(DensityVector(3, 0.0), 10), (Configuration{0, 0, 0}));
  const auto eta = initial_configuration(DensityVector{0.26}, 10);
  EXPECT_EQ(eta, (Configuration{2}));
  EXPECT_LT(std::abs(0.2 - 0.26), 0.1);
}

TEST(EventRates, ZeroConfigurationIsAbsorbing) {
  SiteKernel k({{0, 1}, {1, 0}});
  for (const auto& r : event_rates(kFeller, k, Configuration{0, 0})) EXPECT_EQ(r.rate, 0.0);
}

TEST(EventRates, SingleSite) {
  const auto rates = event_rates(kFeller, SiteKernel(1), Configuration{10});
  ASSERT_EQ(rates.size(), 2u);
  EXPECT_DOUBLE_EQ(rate_of(rates, Event::birth(0)), 45.0);
  EXPECT_DOUBLE_EQ(rate_of(rates, Event::death(0)), 55.0);
}

TEST(EventRates, JumpRateIsCountTimesKernel) {
  SiteKernel k({{0, 1}, {0, 0}});
  const auto rates = event_rates(kFeller, k, Configuration{3, 0});
  EXPECT_DOUBLE_EQ(rate_of(rates, Event::jump(0, 1)), 3.0);
  EXPECT_EQ(rate_of(rates, Event::jump(1, 0)), 0.0);
}

TEST(Step, AbsorbedStateIsAnError) {
  RngStream rng(1, 0);
  EXPECT_THROW(step(kFeller, SiteKernel(1), Configuration{0}, rng), AbsorbedState);
}

TEST(Step, SinglePossibleEventIsChosen) {
  // One particle, beta so large that F^+ = 0: only a death is possible.
  const ModelParams p{1.0, 100.0, 1, 1, 10};
  RngStream rng(5, 0);
  for (int i = 0; i < 100; ++i) {
    const auto r = step(p, SiteKernel(1), Configuration{1}, rng);
    EXPECT_EQ(r.event.kind, EventKind::Death);
    EXPECT_EQ(r.next, (Configuration{0}));
    EXPECT_GT(r.event.time, 0.0);
  }
}

TEST(Step, EventFrequenciesMatchRates) {
  SiteKernel k({{0, 1.5, 0.5}, {0.7, 0, 0}, {0, 2.0, 0}});
  const ModelParams p{1.3, 0.6, 2, 1, 4};
  const Configuration eta{3, 1, 2};
  const auto rates = event_rates(p, k, eta);
  double total = 0.0;
  for (const auto& r : rates) total += r.rate;
  CtmcEngine engine(p, k, eta);
  RngStream rng(99, 0);
  std::map<std::tuple<int, int, int>, int> counts;
  const int steps = 100'000;
  for (int i = 0; i < steps; ++i) {
    const Event e = engine.draw(rng);  // frozen state: draw without applying
    counts[{static_cast<int>(e.kind), static_cast<int>(e.from), static_cast<int>(e.to)}]++;
  }
  for (const auto& r : rates) {
    const double prob = r.rate / total;
    const int c = counts[{static_cast<int>(r.event.kind), static_cast<int>(r.event.from),
                          static_cast<int>(r.event.to)}];
    if (prob == 0.0) {
      EXPECT_EQ(c, 0);
      continue;
    }
    const double se = std::sqrt(prob * (1.0 - prob) / steps);
    EXPECT_LE(std::abs(c / static_cast<double>(steps) - prob), 4.0 * se)
        << to_string(r.event.kind) << " " << r.event.from << "->" << r.event.to;
  }
}

TEST(Simulate, ZeroStartIsConstant) {
  SimulationOptions opts;
  opts.horizon = 2.0;
  opts.sample_dt = 0.5;
  RngStream rng(1, 0);
  const auto traj = simulate(kFeller, SiteKernel(1), Configuration{0}, opts, rng);
  EXPECT_EQ(traj.event_count, 0u);
  EXPECT_EQ(traj.termination, Termination::AbsorbedAtZero);
  ASSERT_EQ(traj.sample_times.size(), 5u);
  for (const auto& row : traj.densities) EXPECT_EQ(row[0], 0.0);
}

TEST(Simulate, GridAndCadlagConvention) {
  SimulationOptions opts;
  opts.horizon = 1.0;
  opts.sample_dt = 0.3;
  RngStream rng(3, 0);
  opts.record_events = true;
  const auto traj = simulate(kFeller, SiteKernel(1), Configuration{10}, opts, rng);
  ASSERT_EQ(traj.sample_times, (std::vector<double>{0.0, 0.3, 0.6, 0.8999999999999999, 1.0}));
  // Replay the log and check every recorded value equals the state after all
  // events at times <= t.
  Configuration eta = traj.initial;
  std::size_t e = 0;
  for (std::size_t i = 0; i < traj.sample_times.size(); ++i) {
    while (e < traj.events->size() && (*traj.events)[e].time <= traj.sample_times[i]) apply_event(eta, (*traj.events)[e++]);
    EXPECT_EQ(traj.densities[i][0], static_cast<double>(eta[0]) / 10.0);
  }
}

TEST(Simulate, MassCapStopsRun) {
  SimulationOptions opts;
  opts.horizon = 100.0;
  opts.guards.mass_cap = 1.5;
  const ModelParams p{1.0, 0.0, 1, 1, 10};
  RngStream rng(8, 0);
  int capped = 0;
  for (int i = 0; i < 50; ++i) {
    const auto traj = simulate(p, SiteKernel(1), Configuration{10}, opts, rng);
    if (traj.termination == Termination::MassCapK) {
      ++capped;
      ASSERT_TRUE(traj.first_passage.mass_exceeds_cap);
      EXPECT_GT(static_cast<double>(total_count(traj.final_state)) / 10.0, 1.5);
    } else {
      EXPECT_EQ(traj.termination, Termination::AbsorbedAtZero);
      EXPECT_TRUE(traj.first_passage.hits_zero);
    }
  }
  EXPECT_GT(capped, 0);
}

TEST(Simulate, EventGuardIsReported) {
  SimulationOptions opts;
  opts.guards.max_events = 10;
  RngStream rng(2, 0);
  const auto traj = simulate(ModelParams{1, 1, 1, 1, 100}, SiteKernel(1), Configuration{100}, opts, rng);
  EXPECT_EQ(traj.termination, Termination::EventGuard);
  EXPECT_EQ(traj.event_count, 10u);
}

TEST(SimulateProperty, DeterministicAndStructurallyValid) {
  SiteKernel k({{0, 1.2, 0.4}, {0.5, 0, 0.9}, {1.0, 0.1, 0}});
  const ModelParams p{0.7, 1.1, 2, 1, 25};
  SimulationOptions opts;
  opts.horizon = 0.5;
  opts.sample_dt = 0.05;
  opts.record_events = true;
  const Configuration eta0{30, 5, 12};
  for (std::uint64_t replica = 0; replica < 20; ++replica) {
    RngStream a(77, replica), b(77, replica);
    const auto t1 = simulate(p, k, eta0, opts, a);
    const auto t2 = simulate(p, k, eta0, opts, b);
    EXPECT_EQ(t1.densities, t2.densities);
    EXPECT_EQ(*t1.events, *t2.events);

    Configuration eta = eta0;
    double last = 0.0;
    for (const Event& e : *t1.events) {
      EXPECT_GT(e.time, last);
      last = e.time;
      const Configuration before = eta;
      apply_event(eta, e);
      int touched = 0;
      for (std::size_t x = 0; x < eta.size(); ++x) {
        ASSERT_GE(eta[x], 0);
        const auto diff = eta[x] - before[x];
        if (diff != 0) {
          ++touched;
          EXPECT_EQ(std::abs(diff), 1);  // density moves by exactly 1/n
        }
      }
      EXPECT_EQ(touched, e.kind == EventKind::Jump ? 2 : 1);
    }
    for (std::size_t i = 1; i < t1.densities.size(); ++i)
      for (std::size_t x = 0; x < 3; ++x) {
        const double steps = (t1.densities[i][x] - t1.densities[i - 1][x]) * 25.0;
        EXPECT_NEAR(steps, std::round(steps), 1e-9);
      }
  }
}

TEST(SimulateProperty, SingleSiteFastPathMatchesGeneralLoop) {
  struct Case {
    ModelParams p;
    std::int64_t start;
    std::optional<double> cap;
    std::uint64_t max_events;
  };
  const std::vector<Case> cases{
      {{1.0, 1.0, 1, 1, 30}, 30, std::nullopt, 100'000'000},
      {{1.0, 1.0, 1, 1, 5}, 2, std::nullopt, 100'000'000},  // often absorbed
      {{0.5, 2.0, 2, 1, 20}, 25, 1.5, 100'000'000},
      {{1.0, 0.0, 1, 2, 10}, 10, 2.0, 100'000'000},
      {{1.0, 1.0, 3, 3, 15}, 15, std::nullopt, 50},
  };
  for (const auto& c : cases) {
    for (std::uint64_t replica = 0; replica < 30; ++replica) {
      SimulationOptions fast;
      fast.horizon = 0.7;
      fast.sample_dt = 0.1;
      fast.record_events = replica % 2 == 0;
      fast.guards.mass_cap = c.cap;
      fast.guards.max_events = c.max_events;
      SimulationOptions slow = fast;
      slow.fast_paths = false;
      RngStream a(13, replica), b(13, replica);
      const auto t1 = simulate(c.p, SiteKernel(1), Configuration{c.start}, fast, a);
      const auto t2 = simulate(c.p, SiteKernel(1), Configuration{c.start}, slow, b);
      EXPECT_EQ(t1.sample_times, t2.sample_times);
      EXPECT_EQ(t1.densities, t2.densities);
      EXPECT_EQ(t1.event_count, t2.event_count);
      EXPECT_EQ(t1.termination, t2.termination);
      EXPECT_EQ(t1.end_time, t2.end_time);
      EXPECT_EQ(t1.final_state, t2.final_state);
      EXPECT_EQ(t1.max_site_count, t2.max_site_count);
      EXPECT_EQ(t1.first_passage.hits_zero, t2.first_passage.hits_zero);
      EXPECT_EQ(t1.first_passage.mass_exceeds_cap, t2.first_passage.mass_exceeds_cap);
      EXPECT_EQ(t1.events, t2.events);
      EXPECT_EQ(a.next_u64(), b.next_u64());  // both consumed the same draws
    }
  }
}

TEST(SimulateMonteCarlo, CriticalBranchingMassIsMartingale) {
  const ModelParams p{1.0, 0.0, 1, 1, 100};
  SimulationOptions opts;
  opts.horizon = 1.0;
  opts.sample_dt = 1.0;
  std::vector<double> mass;
  for (std::uint64_t i = 0; i < 10'000; ++i) {
    RngStream rng(4, i);
    const auto traj = simulate(p, SiteKernel(1), Configuration{100}, opts, rng);
    mass.push_back(traj.densities.back()[0]);
  }
  const auto st = sample_stats(mass);
  EXPECT_LE(std::abs(st.mean - 1.0), 4.0 * st.std_err);
}

TEST(SimulateMonteCarlo, SingleSiteMeanDecaysExponentially) {
  const ModelParams p{1.0, 1.0, 1, 1, 100};
  SimulationOptions opts;
  opts.horizon = 1.0;
  opts.sample_dt = 1.0;
  std::vector<double> z;
  for (std::uint64_t i = 0; i < 20'000; ++i) {
    RngStream rng(5, i);
    z.push_back(simulate(p, SiteKernel(1), Configuration{100}, opts, rng).densities.back()[0]);
  }
  const auto st = sample_stats(z);
  EXPECT_LE(std::abs(st.mean - std::exp(-1.0)), 4.0 * st.std_err);
}

TEST(SimulateMonteCarlo, TwoSiteMeansFollowLinearOde) {
  SiteKernel k({{0, 2.0}, {0.5, 0}});
  const ModelParams p{1.0, 1.0, 1, 1, 50};
  SDESpec spec;
  spec.kernel = k;
  spec.rho0 = DensityVector{1.0, 0.2};
  const auto oracle = moment_oracle_linear(spec, 1.0);
  SimulationOptions opts;
  opts.horizon = 1.0;
  opts.sample_dt = 1.0;
  std::vector<double> a, b;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    RngStream rng(6, i);
    const auto traj = simulate(p, k, initial_configuration(spec.rho0, p.n), opts, rng);
    a.push_back(traj.densities.back()[0]);
    b.push_back(traj.densities.back()[1]);
  }
  EXPECT_LE(std::abs(sample_stats(a).mean - oracle.mean[0]), 4.0 * sample_stats(a).std_err);
  EXPECT_LE(std::abs(sample_stats(b).mean - oracle.mean[1]), 4.0 * sample_stats(b).std_err);
}

TEST(Export, CsvHeaderAndPrecision) {
  std::vector<double> times{0.0, 0.5};
  std::vector<std::vector<double>> rows{{1.0, 1.0 / 3.0}, {0.25, 0.0}};
  std::ostringstream os;
  write_density_csv(os, times, rows, 2);
  EXPECT_EQ(os.str(), "t,site_0,site_1\r\n0,1,0.333333333333\r\n0.5,0.25,0\r\n");
}

TEST(Export, EventLogJsonl) {
  Trajectory traj;
  traj.events = std::vector<Event>{Event::jump(0, 1, 0.5), Event::birth(2, 0.75)};
  std::ostringstream os;
  write_event_log_jsonl(os, traj);
  EXPECT_EQ(os.str(),
            "{\"t\":0.5,\"kind\":\"jump\",\"from\":0,\"to\":1}\n"
            "{\"t\":0.75,\"kind\":\"birth\",\"from\":2,\"to\":2}\n");
}
