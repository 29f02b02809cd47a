#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"
#include "rdlab/coupling.hpp"
#include "rdlab/ctmc.hpp"
#include "rdlab/diagnostics.hpp"
#include "rdlab/scaling.hpp"
#include "rdlab/sde.hpp"

namespace rdlab::cli {

enum ExitCode : int { kOk = 0, kTestFail = 1, kConfigError = 2, kGuard = 3 };

struct Context {
  std::string command;
  std::optional<RunConfig> config;
  std::uint64_t seed = kDefaultSeed;
  unsigned threads = 1;
  std::filesystem::path out = "rdlab_out";
  bool verbose = false;
  bool quiet = false;  // suppress the report on stdout
};

// ------------------------------------------------------------------ output

namespace io {

inline std::ofstream open(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  return os;
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  auto os = open(path);
  os << j.dump(2) << "\n";
}

inline std::string padded(std::uint64_t i, std::uint64_t count) {
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  std::string s = std::to_string(i);
  return std::string(width - std::min(width, s.size()), '0') + s;
}

}  // namespace io

inline void log(const Context& ctx, const std::string& msg) {
  if (ctx.verbose) std::cerr << "[rdlab " << ctx.command << "] " << msg << "\n";
}

inline Json report_json(const TestReport& r) {
  return Json{{"name", r.name},         {"statistic", r.statistic}, {"reference", r.reference},
              {"std_err", r.std_err},   {"z", r.z},                 {"threshold", r.threshold},
              {"pass", r.pass},         {"replicas", r.replicas}};
}

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    Json row = Json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

/// Writes manifest.json and the command report, and echoes the report.
inline void finish(const Context& ctx, const std::string& report_name, const Json& report) {
  std::filesystem::create_directories(ctx.out);
  Json manifest;
  manifest["version"] = kVersion;
  manifest["command"] = ctx.command;
  if (ctx.config) {
    manifest["config_hash"] = config_hash(*ctx.config);
    manifest["seed"] = ctx.seed;
    manifest["replicas"] = ctx.config->run.replicas;
    manifest["config"] = to_json(*ctx.config);
  }
  manifest["artifacts"] = report.contains("artifacts") ? report["artifacts"] : Json::array();
  io::write_json(ctx.out / "manifest.json", manifest);
  io::write_json(ctx.out / report_name, report);
  if (!ctx.quiet) std::cout << report.dump(2) << "\n";
}

inline const RunConfig& require_config(const Context& ctx) {
  if (!ctx.config) throw ConfigError("this command needs --config or --preset");
  return *ctx.config;
}

inline SimulationOptions simulation_options(const RunConfig& c) {
  SimulationOptions o;
  o.horizon = c.run.horizon;
  o.sample_dt = c.run.sample_dt;
  o.guards.max_events = c.run.max_events;
  o.guards.mass_cap = c.run.mass_cap;
  return o;
}

inline SDESpec sde_spec(const RunConfig& c) {
  SDESpec s;
  s.alpha = c.model.alpha;
  s.beta = c.model.beta;
  s.k = c.model.k;
  s.ell = c.model.ell;
  s.kernel = c.kernel;
  s.rho0 = c.rho0;
  s.dt = c.sde_dt();
  s.horizon = c.run.horizon;
  s.sample_dt = c.run.sample_dt;
  s.mass_guard = c.run.mass_cap;
  return s;
}

inline Json advisories(const RunConfig& c) {
  Json a = Json::array();
  if (c.model.outside_theorem()) a.push_back("beta = 0: no restoring drift, outside the diffusion-limit hypotheses");
  if (c.model.truncation_advisory()) a.push_back("n <= beta/alpha: birth-rate truncation is active");
  if (c.model.k < c.model.ell) a.push_back("k < ell: moment growth is not controlled");
  return a;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  bool event_logs = false;
};

inline int run_simulate(const Context& ctx, const SimulateOptions& opt) {
  const RunConfig& c = require_config(ctx);
  std::filesystem::create_directories(ctx.out);
  SimulationOptions so = simulation_options(c);
  so.record_events = opt.event_logs;
  const Configuration eta0 = initial_configuration(c.rho0, c.model.n);
  struct Summary {
    Termination termination = Termination::Horizon;
    std::uint64_t events = 0;
    double end_time = 0.0;
    std::int64_t max_site_count = 0;
    std::optional<double> hits_zero;
    std::optional<double> exceeds_cap;
  };
  const std::uint64_t reps = c.run.replicas;
  log(ctx, "running " + std::to_string(reps) + " replicas");
  const auto summaries = parallel_map<Summary>(reps, ctx.threads, [&](std::size_t i) {
    RngStream rng(ctx.seed, i, StreamPurpose::Ctmc);
    const Trajectory traj = simulate(c.model, c.kernel, eta0, so, rng);
    const std::string id = io::padded(i, reps);
    {
      auto os = io::open(ctx.out / ("trajectory_" + id + ".csv"));
      write_trajectory_csv(os, traj);
    }
    if (opt.event_logs) {
      auto os = io::open(ctx.out / ("events_" + id + ".jsonl"));
      write_event_log_jsonl(os, traj);
    }
    return Summary{traj.termination, traj.event_count, traj.end_time, traj.max_site_count,
                   traj.first_passage.hits_zero, traj.first_passage.mass_exceeds_cap};
  });
  Json reps_json = Json::array();
  Json artifacts = Json::array();
  std::uint64_t guarded = 0;
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    const bool guard = s.termination == Termination::EventGuard || s.termination == Termination::MassCapK;
    guarded += guard ? 1 : 0;
    reps_json.push_back(Json{{"replica", i},
                             {"termination", std::string(to_string(s.termination))},
                             {"events", s.events},
                             {"end_time", s.end_time},
                             {"max_site_count", s.max_site_count},
                             {"zero_time", s.hits_zero ? Json(*s.hits_zero) : Json()},
                             {"mass_cap_time", s.exceeds_cap ? Json(*s.exceeds_cap) : Json()}});
    artifacts.push_back("trajectory_" + io::padded(i, reps) + ".csv");
    if (opt.event_logs) artifacts.push_back("events_" + io::padded(i, reps) + ".jsonl");
  }
  Json report;
  report["command"] = "simulate";
  report["advisories"] = advisories(c);
  report["initial_configuration"] = eta0;
  report["guarded_replicas"] = guarded;
  report["replicas"] = reps_json;
  report["artifacts"] = artifacts;
  finish(ctx, "simulate.json", report);
  return guarded > 0 ? kGuard : kOk;
}

// --------------------------------------------------------------------- sde

inline int run_sde(const Context& ctx) {
  const RunConfig& c = require_config(ctx);
  const SDESpec spec = sde_spec(c);
  spec.validate();
  std::filesystem::create_directories(ctx.out);
  log(ctx, "integrating " + std::to_string(c.run.replicas) + " paths at dt=" + std::to_string(spec.dt));
  const SdeEnsemble ens = simulate_paths(spec, c.run.replicas, ctx.seed, ctx.threads);
  const std::size_t v = c.kernel.site_count();
  const auto& times = ens.paths.front().sample_times;

  std::vector<std::vector<double>> mean_rows(times.size(), std::vector<double>(v, 0.0));
  for (std::size_t i = 0; i < times.size(); ++i)
    for (std::size_t x = 0; x < v; ++x) {
      std::vector<double> col;
      col.reserve(ens.paths.size());
      for (const auto& p : ens.paths) col.push_back(p.states[i][x]);
      mean_rows[i][x] = sample_stats(col).mean;
    }
  {
    auto os = io::open(ctx.out / "sde_mean.csv");
    write_density_csv(os, times, mean_rows, v);
  }
  {
    auto os = io::open(ctx.out / "sde_terminal.csv");
    os << "replica";
    for (std::size_t x = 0; x < v; ++x) os << ",site_" << x;
    os << "\r\n";
    for (std::size_t r = 0; r < ens.paths.size(); ++r) {
      os << r;
      for (double z : ens.paths[r].terminal) os << "," << rdlab::detail::format_g12(z);
      os << "\r\n";
    }
  }

  Json report;
  report["command"] = "sde";
  report["advisories"] = advisories(c);
  report["dt"] = spec.dt;
  report["paths"] = ens.paths.size();
  report["stability_advisory"] = spec.stability_advisory();
  report["guard_excursions"] = ens.guard_excursions;
  Json terminal = Json::array();
  std::vector<std::vector<double>> cols(v);
  for (const auto& p : ens.paths)
    for (std::size_t x = 0; x < v; ++x) cols[x].push_back(p.terminal[x]);
  for (std::size_t x = 0; x < v; ++x) {
    const auto st = sample_stats(cols[x]);
    terminal.push_back(Json{{"site", x}, {"mean", st.mean}, {"std_err", st.std_err}});
  }
  report["terminal"] = terminal;

  bool pass = true;
  if (c.model.k == 1 && c.model.ell == 1 && ens.paths.size() >= 100) {
    const auto oracle = moment_oracle_linear(spec, spec.horizon);
    Json tests = Json::array();
    for (std::size_t x = 0; x < v; ++x) {
      auto r = moment_compare(cols[x], oracle.mean[x], oracle.second(x, x));
      r.name = "site_" + std::to_string(x) + "_" + r.name;
      pass = pass && r.pass;
      tests.push_back(report_json(r));
    }
    report["oracle_tests"] = tests;
  }
  report["pass"] = pass;
  report["artifacts"] = Json::array({"sde_mean.csv", "sde_terminal.csv"});
  finish(ctx, "sde.json", report);
  if (!pass) return kTestFail;
  return ens.guard_excursions > 0 ? kGuard : kOk;
}

// ------------------------------------------------------------------ couple

struct CoupleOptions {
  std::optional<double> cap;
};

inline int run_couple(const Context& ctx, const CoupleOptions& opt) {
  const RunConfig& c = require_config(ctx);
  const std::optional<double> cap = opt.cap ? opt.cap : c.run.mass_cap;
  if (!cap) throw ConfigError("couple needs a level K (--K or run.mass_cap)");
  std::filesystem::create_directories(ctx.out);
  const Configuration eta0 = initial_configuration(c.rho0, c.model.n);
  const double c0 = static_cast<double>(total_count(eta0)) / static_cast<double>(c.model.n);
  if (!(*cap >= c0)) throw ConfigError("K must be at least the initial mass");

  log(ctx, "domination check");
  const DominationReport dom = domination_ensemble(c.model, c.kernel, eta0, c.run.horizon, c.run.replicas,
                                                   ctx.seed, ctx.threads, c.run.max_events);
  log(ctx, "hitting estimate");
  const HittingEstimate hit = hitting_bound_estimate(c.model, c.kernel, eta0, *cap, c.run.replicas, ctx.seed,
                                                     ctx.threads, c.run.max_events);
  {
    auto os = io::open(ctx.out / "passages.csv");
    write_passage_csv(os, hit);
  }
  const bool dom_pass = dom.violations == 0;
  const bool hit_pass = hit.p_hat <= hit.bound + kDefaultZThreshold * hit.std_err;
  Json report;
  report["command"] = "couple";
  report["advisories"] = advisories(c);
  report["C0"] = c0;
  report["K"] = *cap;
  report["n"] = c.model.n;
  report["domination"] = Json{{"replicas", dom.replicas},
                              {"violations", dom.violations},
                              {"excess_decreases", dom.excess_decreases},
                              {"min_margin", dom.replicas > dom.guarded ? Json(dom.min_margin) : Json()},
                              {"events", dom.events},
                              {"guarded", dom.guarded},
                              {"pass", dom_pass}};
  report["hitting"] = Json{{"p_hat", hit.p_hat},       {"std_err", hit.std_err},   {"bound", hit.bound},
                           {"exceeded", hit.exceeded}, {"hit_zero", hit.hit_zero}, {"guarded", hit.guarded},
                           {"pass", hit_pass}};
  report["pass"] = dom_pass && hit_pass;
  report["artifacts"] = Json::array({"passages.csv"});
  finish(ctx, "couple.json", report);
  if (!(dom_pass && hit_pass)) return kTestFail;
  return (dom.guarded > 0 || hit.guarded > 0) ? kGuard : kOk;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseOptions {
  std::size_t site = 0;
  std::optional<std::size_t> pair_site;
};

inline int run_diagnose(const Context& ctx, const DiagnoseOptions& opt) {
  const RunConfig& c = require_config(ctx);
  const std::size_t v = c.kernel.site_count();
  const std::size_t y = opt.pair_site.value_or(v > 1 ? (opt.site + 1) % v : opt.site);
  if (opt.site >= v || y >= v) throw ConfigError("site index out of range");
  std::filesystem::create_directories(ctx.out);
  const Configuration eta0 = initial_configuration(c.rho0, c.model.n);
  log(ctx, "martingale ensemble");
  const MartingaleEnsemble e = martingale_ensemble(c.model, c.kernel, eta0, simulation_options(c), opt.site, y,
                                                   c.run.replicas, ctx.seed, ctx.threads);
  const std::vector<TestReport> tests{martingale_mean_test(e), martingale_mean_test(e, true), qv_test(e)};
  bool pass = true;
  Json tj = Json::array();
  for (const auto& t : tests) {
    pass = pass && t.pass;
    tj.push_back(report_json(t));
  }
  Json report;
  report["command"] = "diagnose";
  report["advisories"] = advisories(c);
  report["site"] = opt.site;
  report["pair_site"] = y;
  report["replicas"] = c.run.replicas;
  report["guarded"] = e.guarded;
  report["tests"] = tj;
  report["pass"] = pass;
  finish(ctx, "diagnose.json", report);
  if (!pass) return kTestFail;
  return e.guarded > 0 ? kGuard : kOk;
}

// ---------------------------------------------------------------- converge

struct ConvergeOptions {
  std::vector<std::int64_t> n_values;  // empty: the config's n
  std::optional<std::uint64_t> sde_replicas;
  std::size_t site = 0;
  std::optional<double> ks_max;  // bound on KS at the largest n
  std::int64_t z_min_n = 0;      // mean z-scores are checked for n >= this
};

inline int run_converge(const Context& ctx, const ConvergeOptions& opt) {
  const RunConfig& c = require_config(ctx);
  SweepSettings s;
  s.n_values = opt.n_values.empty() ? std::vector<std::int64_t>{c.model.n} : opt.n_values;
  s.replicas = c.run.replicas;
  s.sde_replicas = opt.sde_replicas.value_or(c.run.replicas);
  s.seed = ctx.seed;
  s.threads = ctx.threads;
  s.site = opt.site;
  s.max_events = c.run.max_events;
  if (opt.site >= c.kernel.site_count()) throw ConfigError("site index out of range");
  SDESpec sde = sde_spec(c);
  sde.mass_guard.reset();
  std::filesystem::create_directories(ctx.out);
  log(ctx, "sweep over " + std::to_string(s.n_values.size()) + " values of n");
  const SweepResult r = convergence_sweep(c.model, sde, s);

  bool z_pass = true;
  bool guarded = false;
  Json rows = Json::array();
  {
    auto os = io::open(ctx.out / "sweep.csv");
    os << "n,mean,std_err,mean_z,ks,max_error,events,guarded\r\n";
    for (const auto& row : r.rows) {
      const bool checked = row.n >= opt.z_min_n;
      const bool ok = !checked || std::abs(row.mean_z) <= kDefaultZThreshold;
      z_pass = z_pass && ok;
      guarded = guarded || row.guarded > 0;
      os << row.n << "," << rdlab::detail::format_g12(row.mean) << "," << rdlab::detail::format_g12(row.std_err) << ","
         << rdlab::detail::format_g12(row.mean_z) << "," << rdlab::detail::format_g12(row.ks) << ","
         << rdlab::detail::format_g12(row.max_error) << "," << row.events << "," << row.guarded << "\r\n";
      rows.push_back(Json{{"n", row.n},
                          {"mean", row.mean},
                          {"std_err", row.std_err},
                          {"mean_z", row.mean_z},
                          {"z_checked", checked},
                          {"ks", row.ks},
                          {"max_error", row.max_error},
                          {"events", row.events},
                          {"guarded", row.guarded}});
    }
  }
  const bool ks_mono = r.ks_nonincreasing_within_noise();
  const bool ks_final = !opt.ks_max || r.rows.back().ks <= *opt.ks_max;
  const bool pass = z_pass && ks_mono && ks_final;
  Json report;
  report["command"] = "converge";
  report["advisories"] = advisories(c);
  report["site"] = r.site;
  report["reference"] = r.oracle_reference ? "moment_oracle" : "sde_ensemble";
  report["reference_mean"] = r.reference_mean;
  report["reference_std_err"] = r.reference_std_err;
  report["sde_dt"] = sde.dt;
  report["sde_paths"] = s.sde_replicas;
  report["ks_noise"] = r.ks_noise;
  report["rows"] = rows;
  report["ks_nonincreasing_within_noise"] = ks_mono;
  if (opt.ks_max) report["ks_max"] = *opt.ks_max;
  report["ks_final_pass"] = ks_final;
  report["mean_z_pass"] = z_pass;
  report["pass"] = pass;
  report["artifacts"] = Json::array({"sweep.csv"});
  finish(ctx, "converge.json", report);
  if (!pass) return kTestFail;
  return guarded ? kGuard : kOk;
}

// --------------------------------------------------------------- exponents

inline ReactionPair reaction_preset(const std::string& name) {
  if (name == "linear") return ReactionPair{Polynomial{{0.0}}, Polynomial{{0.0, 1.0}}};
  if (name == "quadratic") return ReactionPair{Polynomial{{0.0, 1.0}}, Polynomial{{0.0, 1.0, 1.0}}};
  if (name == "cubic") return ReactionPair{Polynomial{{0.0, 0.0, 1.0}}, Polynomial{{0.0, 0.0, 1.0, 1.0}}};
  throw ConfigError("unknown reaction preset '" + name + "' (linear, quadratic, cubic)");
}

struct ExponentsOptions {
  std::optional<std::string> reaction;
  std::vector<double> f_plus;
  std::vector<double> f_minus;
};

inline int run_exponents(const Context& ctx, const ExponentsOptions& opt) {
  ScalingExponents e;
  Json source;
  if (opt.reaction || !opt.f_plus.empty() || !opt.f_minus.empty()) {
    ReactionPair r;
    if (opt.reaction) {
      if (!opt.f_plus.empty() || !opt.f_minus.empty())
        throw ConfigError("--reaction cannot be combined with --f-plus/--f-minus");
      r = reaction_preset(*opt.reaction);
      source = Json{{"reaction", *opt.reaction}};
    } else {
      r = ReactionPair{Polynomial{opt.f_plus}, Polynomial{opt.f_minus}};
      source = Json{{"f_plus", opt.f_plus}, {"f_minus", opt.f_minus}};
    }
    try {
      r.validate();
    } catch (const InvalidParameter& err) {
      throw ConfigError(err.what());
    }
    e = solve_exponents(r);
  } else {
    const RunConfig& c = require_config(ctx);
    e = solve_exponents(c.model.k, c.model.ell);
    e.alpha = c.model.alpha;
    e.beta = c.model.beta;
    source = Json{{"model", "config"}};
  }
  Json report;
  report["k"] = e.k;
  report["beta"] = e.beta;
  report["ell"] = e.ell;
  report["alpha"] = e.alpha;
  report["a"] = to_string(e.a);
  report["b"] = to_string(e.b);
  report["source"] = source;
  finish(ctx, "exponents.json", report);
  return kOk;
}

// ------------------------------------------------------------------ coeffs

inline int run_coeffs(const Context& ctx) {
  const RunConfig& c = require_config(ctx);
  const double n = static_cast<double>(c.model.n);
  for (double z : c.rho0.values()) {
    const double count = z * n;
    if (std::abs(count - std::round(count)) > 1e-9 * std::max(1.0, count))
      throw ConfigError("rho0 must lie on the lattice (1/n) N for coeffs");
  }
  const Coefficients d = discrete_coefficients(c.model, c.kernel, c.rho0);
  const Coefficients l = limit_coefficients(c.model.alpha, c.model.beta, c.model.k, c.model.ell, c.kernel, c.rho0);
  Json errors = Json::array();
  for (double z : c.rho0.values()) errors.push_back(error_term(c.model, z));
  Json report;
  report["command"] = "coeffs";
  report["n"] = c.model.n;
  report["zeta"] = c.rho0.vector();
  report["drift"] = d.drift;
  report["covariation"] = matrix_json(d.covariation);
  report["error_term"] = errors;
  report["limit_drift"] = l.drift;
  report["limit_covariation"] = matrix_json(l.covariation);
  finish(ctx, "coeffs.json", report);
  return kOk;
}

}  // namespace rdlab::cli
