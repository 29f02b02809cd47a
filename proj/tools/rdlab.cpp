// rdlab: command-line front end for the reaction-diffusion toolkit.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "commands.hpp"

using namespace rdlab;
using namespace rdlab::cli;

namespace {

struct CommonFlags {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> replicas;
  std::optional<std::int64_t> n;
  std::optional<double> horizon;
  std::optional<double> dt;
  std::optional<std::uint64_t> max_events;
  unsigned threads = default_thread_count();
  std::string out = "rdlab_out";
  bool verbose = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool needs_model = true) {
  auto* cfg = cmd->add_option("--config", f.config_path, "JSON run configuration");
  auto* pre = cmd->add_option("--preset", f.preset_name, "built-in configuration")
                  ->check(CLI::IsMember(preset_names()));
  cfg->excludes(pre);
  if (needs_model) {
    cmd->add_option("--seed", f.seed, "master seed (overrides config and RD_SEED)");
    cmd->add_option("--replicas", f.replicas, "number of replicas")->check(CLI::PositiveNumber);
    cmd->add_option("--n", f.n, "scale parameter n")->check(CLI::PositiveNumber);
    cmd->add_option("--horizon", f.horizon, "time horizon T")->check(CLI::PositiveNumber);
    cmd->add_option("--dt", f.dt, "SDE time step")->check(CLI::PositiveNumber);
    cmd->add_option("--max-events", f.max_events, "per-replica event guard")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  }
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_flag("--verbose", f.verbose, "progress on stderr");
  cmd->add_flag("--quiet", f.quiet, "do not echo the report on stdout");
}

Context make_context(const std::string& name, const CommonFlags& f) {
  Context ctx;
  ctx.command = name;
  ctx.threads = std::max(1u, f.threads);
  ctx.out = f.out;
  ctx.verbose = f.verbose;
  ctx.quiet = f.quiet;
  std::optional<RunConfig> c;
  if (!f.config_path.empty()) c = load_config(f.config_path);
  else if (!f.preset_name.empty()) c = preset(f.preset_name);
  if (c) {
    if (f.seed) c->run.seed = *f.seed;
    if (f.replicas) c->run.replicas = *f.replicas;
    if (f.n) c->model.n = *f.n;
    if (f.horizon) c->run.horizon = *f.horizon;
    if (f.dt) c->sde = SdeSettings{*f.dt};
    if (f.max_events) c->run.max_events = *f.max_events;
    c->validate();
    ctx.seed = c->resolved_seed();
  }
  ctx.config = c;
  return ctx;
}

std::vector<std::int64_t> parse_n_list(const std::string& s) {
  std::vector<std::int64_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError("--n-list entries must be positive integers");
    }
  }
  if (out.empty()) throw ConfigError("--n-list is empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reaction-diffusion particle systems: simulation, limits and diagnostics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonFlags sim_f, sde_f, couple_f, diag_f, conv_f, exp_f, coeff_f;
  SimulateOptions sim_o;
  CoupleOptions couple_o;
  DiagnoseOptions diag_o;
  std::optional<std::size_t> pair_site;
  ConvergeOptions conv_o;
  std::string n_list;
  ExponentsOptions exp_o;

  auto* sim = app.add_subcommand("simulate", "exact CTMC trajectories to CSV");
  add_common(sim, sim_f);
  sim->add_flag("--events", sim_o.event_logs, "also write per-replica JSONL event logs");

  auto* sde = app.add_subcommand("sde", "Euler-Maruyama paths of the limit equation");
  add_common(sde, sde_f);

  auto* couple = app.add_subcommand("couple", "domination coupling and hitting-probability bound");
  add_common(couple, couple_f);
  couple->add_option("--K", couple_o.cap, "mass level K (default run.mass_cap)")->check(CLI::PositiveNumber);

  auto* diag = app.add_subcommand("diagnose", "martingale and quadratic-variation tests");
  add_common(diag, diag_f);
  diag->add_option("--site", diag_o.site, "site x for the coordinate martingale");
  diag->add_option("--pair-site", pair_site, "site y for the product martingale");

  auto* conv = app.add_subcommand("converge", "particle system against the limit SDE over n");
  add_common(conv, conv_f);
  conv->add_option("--n-list", n_list, "comma-separated values of n");
  conv->add_option("--sde-replicas", conv_o.sde_replicas, "SDE paths (default --replicas)")
      ->check(CLI::PositiveNumber);
  conv->add_option("--site", conv_o.site, "site whose marginal is compared");
  conv->add_option("--ks-max", conv_o.ks_max, "KS bound at the largest n");
  conv->add_option("--z-min-n", conv_o.z_min_n, "check mean z-scores only for n >= this");

  auto* exps = app.add_subcommand("exponents", "fluctuation exponents (a, b) of a reaction");
  add_common(exps, exp_f, false);
  exps->add_option("--reaction", exp_o.reaction, "linear, quadratic or cubic");
  exps->add_option("--f-plus", exp_o.f_plus, "coefficients of F+ from degree 0")->delimiter(',');
  exps->add_option("--f-minus", exp_o.f_minus, "coefficients of F- from degree 0")->delimiter(',');

  auto* coeffs = app.add_subcommand("coeffs", "discrete and limit coefficients at rho0");
  add_common(coeffs, coeff_f, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*sim) return run_simulate(make_context("simulate", sim_f), sim_o);
    if (*sde) return run_sde(make_context("sde", sde_f));
    if (*couple) return run_couple(make_context("couple", couple_f), couple_o);
    if (*diag) {
      diag_o.pair_site = pair_site;
      return run_diagnose(make_context("diagnose", diag_f), diag_o);
    }
    if (*conv) {
      if (!n_list.empty()) conv_o.n_values = parse_n_list(n_list);
      return run_converge(make_context("converge", conv_f), conv_o);
    }
    if (*exps) return run_exponents(make_context("exponents", exp_f), exp_o);
    if (*coeffs) return run_coeffs(make_context("coeffs", coeff_f));
  } catch (const ConfigError& e) {
    std::cerr << "rdlab: configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const InvalidParameter& e) {
    std::cerr << "rdlab: invalid parameter: " << e.what() << "\n";
    return kConfigError;
  } catch (const DimensionError& e) {
    std::cerr << "rdlab: dimension error: " << e.what() << "\n";
    return kConfigError;
  } catch (const OrderViolation& e) {
    std::cerr << "rdlab: " << e.what() << "\n";
    return kConfigError;
  } catch (const ZeroReaction& e) {
    std::cerr << "rdlab: " << e.what() << "\n";
    return kConfigError;
  } catch (const DominationViolation& e) {
    std::cerr << "rdlab: domination violated: " << e.what() << "\n";
    return kTestFail;
  } catch (const Error& e) {
    std::cerr << "rdlab: runtime anomaly: " << e.what() << "\n";
    return kGuard;
  } catch (const std::exception& e) {
    std::cerr << "rdlab: " << e.what() << "\n";
    return kGuard;
  }
  return kOk;
}
