// safekernel: command-line front end for solving, fitting and simulating.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "safekernel/errors.hpp"
#include "safekernel/io.hpp"
#include "safekernel/learning.hpp"
#include "safekernel/parallel.hpp"
#include "safekernel/reachability.hpp"
#include "safekernel/server.hpp"
#include "safekernel/simulation.hpp"
#include "safekernel/supervisor.hpp"

using namespace safekernel;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNonConvergence = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::control_bound:
      return kExitUsage;
    case ErrorKind::non_convergence:
      return kExitNonConvergence;
    default:
      return kExitData;
  }
}

Grid3 parse_grid(const std::string& text, double half_extent) {
  std::array<int, 3> dims{};
  char tail = 0;
  if (std::sscanf(text.c_str(), "%d,%d,%d%c", &dims[0], &dims[1], &dims[2], &tail) != 3) {
    throw Error(ErrorKind::invalid_argument, "--grid expects NX,NY,NT, got '" + text + "'");
  }
  Grid3 g = Grid3::dubins(half_extent, dims[0], dims[1], dims[2]);
  g.validate();
  return g;
}

std::vector<double> parse_range(const std::string& text) {
  double lo = 0, hi = 0, stepv = 0;
  char tail = 0;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf%c", &lo, &hi, &stepv, &tail) != 3 || !(stepv > 0) || hi < lo) {
    throw Error(ErrorKind::invalid_argument, "--omegas expects LO:HI:STEP, got '" + text + "'");
  }
  std::vector<double> out;
  const auto n = static_cast<long>(std::floor((hi - lo) / stepv + 1e-9));
  for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * stepv);
  return out;
}

ValueFunction solve_one(double omega, double radius, const Grid3& grid, const SolverSettings& settings) {
  ValueFunction vf = solve_hji(signed_distance_payoff({0.0, 0.0, radius}, grid), DubinsParams{3.0, omega}, settings);
  vf.obstacle_radius = radius;
  if (!vf.converged) {
    char msg[160];
    std::snprintf(msg, sizeof msg, "omega %.4g: no convergence by t_max (residual %.3g after %d steps)", omega,
                  vf.residual, vf.iterations);
    throw Error(ErrorKind::non_convergence, msg);
  }
  return vf;
}

const ValueFunction& member_with_omega(const LibraryDir& lib, double omega) {
  for (const ValueFunction& vf : lib.members) {
    if (std::abs(vf.omega_max - omega) < 1e-9) return vf;
  }
  throw Error(ErrorKind::invalid_argument, "library has no member with omega_max " + std::to_string(omega));
}

struct SolveOpts {
  std::string grid = "121,121,60";
  double half_extent = 15.0;
  double cfl = 0.9;
  double tol = -1.0;
  double t_max = 20.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--grid", grid, "NX,NY,NT")->capture_default_str();
    cmd->add_option("--half-extent", half_extent, "x, y span [-h, h]")->capture_default_str();
    cmd->add_option("--cfl", cfl)->capture_default_str();
    cmd->add_option("--tol", tol, "<= 0: 1e-3 of the payoff range")->capture_default_str();
    cmd->add_option("--t-max", t_max)->capture_default_str();
  }
  SolverSettings settings() const { return {cfl, tol, t_max}; }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe-set learning from supervisor interventions"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "Solve one avoid value function");
  SolveOpts solve_opts;
  double solve_omega = 1.0, solve_radius = 2.25;
  std::string solve_out;
  solve->add_option("--omega", solve_omega)->capture_default_str();
  solve->add_option("--radius", solve_radius)->capture_default_str();
  solve_opts.add(solve);
  solve->add_option("--out", solve_out)->required();

  // library
  auto* library = app.add_subcommand("library", "Solve a library over omega plus the baseline sets");
  SolveOpts lib_opts;
  std::string lib_omegas = "0.25:3.0:0.25", lib_out;
  double lib_radius = 2.25, lib_true_omega = 1.0;
  library->add_option("--omegas", lib_omegas, "LO:HI:STEP")->capture_default_str();
  library->add_option("--radius", lib_radius)->capture_default_str();
  library->add_option("--true-omega", lib_true_omega, "robot turn rate for the baseline sets")->capture_default_str();
  lib_opts.add(library);
  library->add_option("--out", lib_out, "output directory")->required();

  // synth
  auto* synth = app.add_subcommand("synth", "Synthetic Phase-II interventions");
  double syn_omega = 0.75, syn_mu = 0.3, syn_sigma = 0.05, syn_radius = 2.25, syn_jitter = 15.0;
  int syn_scenes = 200;
  std::uint64_t syn_seed = 1;
  std::string syn_out, syn_vf, syn_library;
  synth->add_option("--omega", syn_omega)->capture_default_str();
  synth->add_option("--mu", syn_mu)->capture_default_str();
  synth->add_option("--sigma", syn_sigma)->capture_default_str();
  synth->add_option("--scenes", syn_scenes)->capture_default_str();
  synth->add_option("--seed", syn_seed)->capture_default_str();
  synth->add_option("--radius", syn_radius, "used when solving V_S here")->capture_default_str();
  synth->add_option("--jitter-deg", syn_jitter, "heading jitter half-width")->capture_default_str();
  synth->add_option("--vf", syn_vf, "supervisor value function (vf-1)");
  synth->add_option("--library", syn_library, "take V_S from this library by --omega");
  synth->add_option("--out", syn_out)->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Select the most likely library member");
  std::string fit_library, fit_records, fit_true, fit_out;
  bool fit_no_prior = false;
  fit->add_option("--library", fit_library)->required();
  fit->add_option("--records", fit_records)->required();
  fit->add_option("--true", fit_true, "true robot value function for the conservative prior");
  fit->add_flag("--no-prior", fit_no_prior, "skip the conservative superset filter");
  fit->add_option("--out", fit_out)->required();

  // predict
  auto* predict = app.add_subcommand("predict", "Fraction of records strictly inside {V > level}");
  std::string pred_vf, pred_records;
  double pred_level = 0.0;
  predict->add_option("--vf", pred_vf)->required();
  predict->add_option("--level", pred_level)->required();
  predict->add_option("--records", pred_records)->required();

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Run seeded team-supervision trials");
  std::string sim_treatment = "standard", sim_alpha = "zero", sim_fit, sim_library, sim_out, sim_trace;
  int sim_trials = 20;
  std::uint64_t sim_seed = 1;
  double sup_omega = 0.75, sup_mu = 0.3, sup_sigma = 0.05, sim_detection = 0.8, sim_duration = 180.0;
  bool no_supervisor = false;
  simulate->add_option("--treatment", sim_treatment)
      ->check(CLI::IsMember({"standard", "learned", "conservative"}))
      ->capture_default_str();
  simulate->add_option("--alpha", sim_alpha)->check(CLI::IsMember({"zero", "mu", "mu2sigma"}))->capture_default_str();
  simulate->add_option("--fit", sim_fit, "fit-1 file (learned treatment, mu rules)");
  simulate->add_option("--library", sim_library)->required();
  simulate->add_option("--trials", sim_trials)->capture_default_str();
  simulate->add_option("--seed", sim_seed)->capture_default_str();
  simulate->add_option("--supervisor-omega", sup_omega)->capture_default_str();
  simulate->add_option("--supervisor-mu", sup_mu)->capture_default_str();
  simulate->add_option("--supervisor-sigma", sup_sigma)->capture_default_str();
  simulate->add_flag("--no-supervisor", no_supervisor);
  simulate->add_option("--detection", sim_detection)->capture_default_str();
  simulate->add_option("--duration", sim_duration, "seconds per trial")->capture_default_str();
  simulate->add_option("--trace", sim_trace, "per-tick JSONL trace of the first trial");
  simulate->add_option("--out", sim_out)->required();

  // serve
  auto* serve = app.add_subcommand("serve", "WebSocket server for live sessions");
  int srv_port = 8080;
  std::string srv_address = "127.0.0.1", srv_library, srv_log_dir = ".", srv_treatment = "standard",
              srv_alpha = "zero", srv_fit;
  serve->add_option("--port", srv_port)->capture_default_str();
  serve->add_option("--address", srv_address)->capture_default_str();
  serve->add_option("--library", srv_library)->required();
  serve->add_option("--log-dir", srv_log_dir)->capture_default_str();
  serve->add_option("--treatment", srv_treatment)
      ->check(CLI::IsMember({"standard", "learned", "conservative"}))
      ->capture_default_str();
  serve->add_option("--alpha", srv_alpha)->check(CLI::IsMember({"zero", "mu", "mu2sigma"}))->capture_default_str();
  serve->add_option("--fit", srv_fit);

  // export-slice
  auto* slice = app.add_subcommand("export-slice", "x,y,V CSV at a fixed heading");
  std::string slice_vf, slice_out;
  double slice_theta = 0.0;
  slice->add_option("--vf", slice_vf)->required();
  slice->add_option("--theta", slice_theta, "radians")->capture_default_str();
  slice->add_option("--out", slice_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  apply_thread_limit_from_env();

  auto resolve_choice = [](const std::string& s) {
    return s == "learned" ? SafeSetChoice::learned
           : s == "conservative" ? SafeSetChoice::conservative
                                 : SafeSetChoice::standard;
  };
  auto resolve_rule = [](const std::string& s) {
    return s == "mu" ? AlphaRule::mu : s == "mu2sigma" ? AlphaRule::mu_plus_2sigma : AlphaRule::zero;
  };
  // Shared by simulate and serve.
  auto team_for = [&](const LibraryDir& lib, const std::string& treatment, const std::string& rule,
                      const std::string& fit_path) {
    std::optional<SupervisorFit> f;
    if (!fit_path.empty()) f = load_fit(fit_path);
    SafeSetBundle sets;
    if (lib.standard) sets.standard = std::make_shared<ValueFunction>(*lib.standard);
    if (lib.conservative) sets.conservative = std::make_shared<ValueFunction>(*lib.conservative);
    if (f) {
      if (f->library_index >= lib.members.size() ||
          std::abs(lib.members[f->library_index].omega_max - f->omega_max) > 1e-9) {
        throw Error(ErrorKind::schema, "fit does not match this library");
      }
      sets.learned = std::make_shared<ValueFunction>(lib.members[f->library_index]);
    } else if (treatment == "learned") {
      throw Error(ErrorKind::invalid_argument, "the learned treatment needs --fit");
    }
    return make_team_safety(resolve_choice(treatment), sets, f ? &*f : nullptr, resolve_rule(rule));
  };

  try {
    if (*solve) {
      const Grid3 grid = parse_grid(solve_opts.grid, solve_opts.half_extent);
      const ValueFunction vf = solve_one(solve_omega, solve_radius, grid, solve_opts.settings());
      save_value_function(solve_out, vf);
      std::printf("omega %.4g radius %.4g: %d steps, residual %.3g -> %s\n", solve_omega, solve_radius,
                  vf.iterations, vf.residual, solve_out.c_str());
    } else if (*library) {
      const Grid3 grid = parse_grid(lib_opts.grid, lib_opts.half_extent);
      const std::vector<double> omegas = parse_range(lib_omegas);
      LibraryDir lib;
      for (double w : omegas) {
        lib.members.push_back(solve_one(w, lib_radius, grid, lib_opts.settings()));
        std::printf("omega %.2f: %d steps\n", w, lib.members.back().iterations);
      }
      lib.standard = solve_one(lib_true_omega, lib_radius, grid, lib_opts.settings());
      lib.conservative = solve_one(lib_true_omega, 2.0 * lib_radius, grid, lib_opts.settings());
      save_library(lib_out, lib);
      std::printf("%zu members plus standard/conservative -> %s\n", lib.members.size(), lib_out.c_str());
    } else if (*synth) {
      std::shared_ptr<const ValueFunction> vS;
      if (!syn_vf.empty()) {
        vS = std::make_shared<ValueFunction>(load_value_function(syn_vf));
      } else if (!syn_library.empty()) {
        vS = std::make_shared<ValueFunction>(member_with_omega(load_library(syn_library), syn_omega));
      } else {
        vS = std::make_shared<ValueFunction>(solve_one(syn_omega, syn_radius, default_grid(), {}));
      }
      CollectionConfig cc;
      cc.scene.obstacle_radius = vS->obstacle_radius;
      cc.scene.heading_jitter = syn_jitter * std::numbers::pi / 180.0;
      std::mt19937_64 rng(syn_seed);
      const auto records = collect_interventions({vS, syn_mu, syn_sigma}, syn_scenes, rng, cc);
      save_records(syn_out, records);
      std::printf("%zu records -> %s\n", records.size(), syn_out.c_str());
    } else if (*fit) {
      const LibraryDir lib = load_library(fit_library);
      const auto records = load_records(fit_records);
      std::optional<ValueFunction> truth;
      if (!fit_true.empty()) truth = load_value_function(fit_true);
      if (!fit_no_prior && !truth) {
        throw Error(ErrorKind::invalid_argument, "the conservative prior needs --true (or pass --no-prior)");
      }
      const SupervisorFit result =
          select_value_function(lib.members, records, truth ? &*truth : nullptr, !fit_no_prior);
      save_fit(fit_out, result);
      std::printf("selected omega %.4g  mu %.4f  sigma %.4f  (%zu records, %zu excluded)\n", result.omega_max,
                  result.mu_hat, std::sqrt(result.sigma2_hat), result.n_records, result.n_excluded);
    } else if (*predict) {
      const ValueFunction vf = load_value_function(pred_vf);
      const auto records = load_records(pred_records);
      std::printf("%.6f\n", predicted_fp_fraction(vf, pred_level, records));
    } else if (*simulate) {
      const LibraryDir lib = load_library(sim_library);
      const TeamSafety team = team_for(lib, sim_treatment, sim_alpha, sim_fit);
      WorldConfig wc;
      wc.detection_prob = sim_detection;
      wc.trial_duration = std::llround(sim_duration / wc.dt);
      std::optional<SimulatedSupervisor> sup;
      if (!no_supervisor) {
        sup = SimulatedSupervisor{
            {std::make_shared<ValueFunction>(member_with_omega(lib, sup_omega)), sup_mu, sup_sigma}, sim_seed};
      }
      const auto trials = run_trials(wc, team, sup ? &*sup : nullptr, sim_trials, sim_seed);
      if (!sim_trace.empty() && sim_trials > 0) {
        std::ofstream trace(sim_trace, std::ios::binary);
        if (!trace) throw Error(ErrorKind::io, "cannot write " + sim_trace);
        WorldConfig first = wc;
        first.seed = sim_seed;
        run_trial(first, team, sup ? &*sup : nullptr, &trace);
      }
      json per_trial = json::array();
      TrialMetrics total;
      for (int i = 0; i < sim_trials; ++i) {
        const TrialMetrics& m = trials[static_cast<std::size_t>(i)];
        json t = metrics_to_json(m);
        t["seed"] = sim_seed + static_cast<std::uint64_t>(i);
        per_trial.push_back(std::move(t));
        total.trips += m.trips;
        total.crashes += m.crashes;
        total.interventions += m.interventions;
        total.false_positives += m.false_positives;
        total.score += m.score;
      }
      json report = {{"schema", kMetricsSchema},
                     {"treatment", sim_treatment},
                     {"alpha_rule", sim_alpha},
                     {"alpha", team.alpha},
                     {"seed", sim_seed},
                     {"supervisor", sup ? json{{"omega_max", sup_omega}, {"mu", sup_mu}, {"sigma", sup_sigma}}
                                        : json(nullptr)},
                     {"trials", std::move(per_trial)},
                     {"totals",
                      {{"trips", total.trips},
                       {"crashes", total.crashes},
                       {"interventions", total.interventions},
                       {"false_positives", total.false_positives},
                       {"score", total.score}}}};
      write_json_file(sim_out, report);
      std::printf("%d trials: trips %d crashes %d interventions %d false positives %d score %lld\n", sim_trials,
                  total.trips, total.crashes, total.interventions, total.false_positives,
                  static_cast<long long>(total.score));
    } else if (*serve) {
      if (srv_port < 0 || srv_port > 65535) throw Error(ErrorKind::invalid_argument, "port out of range");
      const LibraryDir lib = load_library(srv_library);
      ServerConfig sc;
      sc.address = srv_address;
      sc.port = static_cast<unsigned short>(srv_port);
      sc.log_dir = srv_log_dir;
      sc.stop_on_signal = true;
      sc.session.team = team_for(lib, srv_treatment, srv_alpha, srv_fit);
      Server server(sc);
      std::printf("listening on ws://%s:%u\n", srv_address.c_str(), static_cast<unsigned>(server.port()));
      std::fflush(stdout);
      server.run();
    } else if (*slice) {
      const ValueFunction vf = load_value_function(slice_vf);
      std::ofstream os(slice_out, std::ios::binary);
      if (!os) throw Error(ErrorKind::io, "cannot write " + slice_out);
      write_slice_csv(os, vf, slice_theta);
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitOk;
}
