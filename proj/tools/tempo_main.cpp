// tempo: solve a problem monolithically, run the overlapping horizon sweep,
// probe boundary-data sensitivity, emit the spectral certificates, or time
// the sweep across worker counts. Results land as json/csv files in --out.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tempo/tempo.hpp"

namespace {

using namespace tempo;

struct CommonArgs {
  std::string problem;
  std::string out_dir = ".";
  long horizon = 0;  // 0: keep the problem's own horizon
  int partitions = 2;
  std::string overlap = "1";
  double rho_reg = 0.5;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  int max_iter = 50;
  int threads = 1;
  std::uint64_t seed = 0;
  int samples = 30;
  double sigma = 0.1;
  double noise_floor = -1.0;  // <0: pick per problem family
};

std::vector<long> parse_overlaps(const std::string& s) {
  std::vector<long> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size() || v < 0) throw ValidationError("bad overlap list: " + s);
    out.push_back(v);
  }
  if (out.empty()) throw ValidationError("empty overlap list");
  return out;
}

// Everything the subcommands need, with the two problem families behind one
// interface: a residual-evaluation problem, boundary data, a window solver,
// and a monolithic solver.
struct LoadedProblem {
  OcpProblem ocp;
  BoundaryCondition bc;
  Subsolver window_solver;
  std::function<std::pair<PrimalDualTrajectory, SolveReport>(
      const BoundaryCondition&, const PrimalDualTrajectory*)>
      monolithic;
  // uninformed starting iterate for sweeps and cold monolithic solves
  std::function<PrimalDualTrajectory(const BoundaryCondition&)> cold_start;
  double default_noise_floor = 0.0;
  bool is_lq = false;
  LqProblemData lq;  // valid when is_lq
};

LoadedProblem load_problem(const CommonArgs& a) {
  LoadedProblem lp;
  SolverOptions sub_opts;
  if (a.problem == "cstr") {
    CstrOptions copts;
    copts.horizon = a.horizon > 0 ? a.horizon : 180;
    copts.rho_reg = a.rho_reg;
    const CstrSteadyState ss = cstr_steady_state(copts);
    lp.ocp = build_cstr_problem(copts, ss);
    lp.bc = cstr_boundary(ss);
    lp.window_solver = make_nlp_subsolver(lp.ocp, sub_opts);
    OcpProblem p = lp.ocp;
    lp.cold_start = [p](const BoundaryCondition& bc) {
      return cstr_cold_iterate(p, bc);
    };
    auto cold = lp.cold_start;
    lp.monolithic = [p, sub_opts, cold](const BoundaryCondition& bc,
                                        const PrimalDualTrajectory* warm) {
      if (warm) return solve_nlp(p, bc, sub_opts, warm);
      const PrimalDualTrajectory z = cold(bc);
      return solve_nlp(p, bc, sub_opts, &z);
    };
    // the subsolver terminates at 1e-8; treat smaller responses as its noise
    lp.default_noise_floor = 1e-6;
  } else {
    const json j = load_json(a.problem);
    lp.is_lq = true;
    lp.lq = lq_from_json(j);
    if (a.horizon > 0) lp.lq.end = lp.lq.start + a.horizon;
    lp.bc = boundary_from_json(j, lp.lq.n_x());
    lp.ocp = make_lq_problem(lp.lq);
    lp.window_solver = make_lq_subsolver(lp.lq, sub_opts);
    LqProblemData d = lp.lq;
    lp.monolithic = [d, sub_opts](const BoundaryCondition& bc,
                                  const PrimalDualTrajectory*) {
      return solve_lq(d, bc, sub_opts);
    };
    OcpProblem p = lp.ocp;
    lp.cold_start = [p](const BoundaryCondition& bc) {
      return PrimalDualTrajectory::zero(p, bc);
    };
  }
  return lp;
}

json run_metadata(const CommonArgs& a, const std::string& cmd) {
  json j;
  j["command"] = cmd;
  j["problem"] = a.problem;
  j["horizon"] = a.horizon;
  j["partitions"] = a.partitions;
  j["overlap"] = a.overlap;
  j["rho_reg"] = a.rho_reg;
  j["tol_primal"] = a.tol_primal;
  j["tol_dual"] = a.tol_dual;
  j["max_iter"] = a.max_iter;
  j["threads"] = a.threads;
  j["seed"] = a.seed;
  return j;
}

std::string out_path(const CommonArgs& a, const std::string& name) {
  std::filesystem::create_directories(a.out_dir);
  return (std::filesystem::path(a.out_dir) / name).string();
}

int cmd_solve(const CommonArgs& a) {
  const LoadedProblem lp = load_problem(a);
  auto [traj, rep] = lp.monolithic(lp.bc, nullptr);
  json j;
  j["run"] = run_metadata(a, "solve");
  j["report"] = report_to_json(rep);
  save_json(out_path(a, "report.json"), j);
  std::cout << (rep.converged ? "converged" : "not_converged")
            << " kkt=" << fmt_g17(rep.final_kkt.max())
            << " iterations=" << rep.iterations << "\n";
  return 0;
}

// Non-convergence anywhere in an experiment is recorded as not_converged in
// the outputs and the command still exits 0: experiments report, they don't
// fail. Only I/O and setup errors exit nonzero.
int cmd_schwarz(const CommonArgs& a) {
  const LoadedProblem lp = load_problem(a);
  auto [ref, ref_rep] = lp.monolithic(lp.bc, nullptr);

  json per_omega = json::array();
  for (const long w : parse_overlaps(a.overlap)) {
    SchwarzConfig cfg;
    cfg.blocks = a.partitions;
    cfg.overlap = w;
    cfg.tol_primal = a.tol_primal;
    cfg.tol_dual = a.tol_dual;
    cfg.max_iterations = a.max_iter;
    cfg.workers = a.threads;
    if (ref_rep.converged) cfg.reference = &ref;
    const PrimalDualTrajectory init = lp.cold_start(lp.bc);
    cfg.initial = &init;
    const SchwarzResult res = schwarz_solve(lp.ocp, lp.bc, cfg, lp.window_solver);
    write_residual_csv(out_path(a, "residuals_omega" + std::to_string(w) + ".csv"),
                       res.log);
    json row;
    row["omega"] = w;
    row["iterations"] = res.iterations;
    row["status"] =
        res.status == SchwarzStatus::converged ? "converged" : "not_converged";
    if (!res.log.empty()) {
      row["final_r"] = res.log.back().r;
      row["final_s"] = res.log.back().s;
      row["final_err_inf"] = res.log.back().err_inf;
    }
    if (res.status == SchwarzStatus::subsolver_failure) {
      row["detail"] = "subsolver_failure";
      row["failed_block"] = res.failed_block;
      row["failure_message"] = res.failure_message;
    }
    std::cout << "omega=" << w << " " << row["status"].get<std::string>()
              << " iterations=" << res.iterations << "\n";
    per_omega.push_back(std::move(row));
  }
  json j;
  j["run"] = run_metadata(a, "schwarz");
  j["reference"] = report_to_json(ref_rep);
  j["sweeps"] = std::move(per_omega);
  save_json(out_path(a, "report.json"), j);
  return 0;
}

int cmd_ads(const CommonArgs& a) {
  const LoadedProblem lp = load_problem(a);
  auto [base, base_rep] = lp.monolithic(lp.bc, nullptr);

  // Perturbed solves continue from the base solution: the probe samples the
  // local solution map. A solve that stops short of tolerance still counts;
  // its deviation is what the solver actually produces there, and on a
  // degenerate problem that non-decay is the finding.
  int non_converged = base_rep.converged ? 0 : 1;
  const PrimalDualTrajectory* warm = &base;
  ResolveFn resolve = [&](const BoundaryCondition& bc) {
    auto [sol, rep] = lp.monolithic(bc, warm);
    if (!rep.converged) ++non_converged;
    return sol;
  };
  AdsConfig cfg;
  cfg.samples = a.samples;
  cfg.sigma = a.sigma;
  cfg.seed = a.seed;
  cfg.noise_floor = a.noise_floor >= 0 ? a.noise_floor : lp.default_noise_floor;
  const AdsReport rep = probe_sensitivity(base, lp.bc, resolve, cfg);

  write_eps_csv(out_path(a, "eps.csv"), rep.curve);
  for (size_t s = 0; s < rep.sample_curves.size(); ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%03zu.csv", s);
    std::vector<AdsCurvePoint> curve;
    for (size_t d = 0; d < rep.sample_curves[s].size(); ++d)
      curve.push_back({static_cast<long>(d), rep.sample_curves[s][d]});
    write_eps_csv(out_path(a, name), curve);
  }
  json j;
  j["run"] = run_metadata(a, "ads");
  j["sigma"] = a.sigma;
  j["samples"] = a.samples;
  j["noise_floor"] = cfg.noise_floor;
  j["base"] = report_to_json(base_rep);
  j["non_converged_solves"] = non_converged;
  j["ads"] = ads_to_json(rep);
  save_json(out_path(a, "report.json"), j);
  std::cout << (rep.decays ? "decays" : "no_decay") << " rho_fit=" << fmt_g17(rep.rho_fit)
            << " r_squared=" << fmt_g17(rep.r_squared) << "\n";
  return 0;
}

int cmd_certify(const CommonArgs& a) {
  const LoadedProblem lp = load_problem(a);
  if (!lp.is_lq)
    throw CLI::ValidationError("--problem", "certificates need a linear problem file");
  const TheoryBounds tb = compute_bounds(lp.lq);
  save_json(out_path(a, "bounds.json"), bounds_to_json(tb));

  const DecayCheck dc = verify_decay(lp.lq, tb);
  json j;
  j["run"] = run_metadata(a, "certify");
  j["gz_rel"] = dc.gz_rel;
  j["gy_rel"] = dc.gy_rel;
  j["eig_min"] = dc.eig_min;
  j["eig_max"] = dc.eig_max;
  j["lambda1"] = tb.lambda1;
  j["lambda2"] = tb.lambda2;
  j["bandwidth"] = dc.bandwidth;
  j["decay_violation"] = dc.decay_violation;
  j["decay_violation_floored"] = dc.decay_violation_floored;
  save_json(out_path(a, "decay_check.json"), j);
  std::cout << "rho=" << fmt_g17(tb.rho) << " N_s=" << tb.N_s
            << " decay_violation=" << fmt_g17(dc.decay_violation) << "\n";
  return 0;
}

int cmd_bench(const CommonArgs& a) {
  const LoadedProblem lp = load_problem(a);
  std::vector<std::pair<int, double>> rows;

  const auto t0 = std::chrono::steady_clock::now();
  auto [ref, ref_rep] = lp.monolithic(lp.bc, nullptr);
  const double mono_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  rows.emplace_back(0, mono_ms);

  bool all_converged = ref_rep.converged;
  const long w = parse_overlaps(a.overlap).front();
  for (int workers = 1; workers <= a.threads; workers *= 2) {
    SchwarzConfig cfg;
    cfg.blocks = a.partitions;
    cfg.overlap = w;
    cfg.tol_primal = a.tol_primal;
    cfg.tol_dual = a.tol_dual;
    cfg.max_iterations = a.max_iter;
    cfg.workers = workers;
    const PrimalDualTrajectory init = lp.cold_start(lp.bc);
    cfg.initial = &init;
    const auto t1 = std::chrono::steady_clock::now();
    const SchwarzResult res = schwarz_solve(lp.ocp, lp.bc, cfg, lp.window_solver);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t1)
            .count();
    all_converged = all_converged && res.status == SchwarzStatus::converged;
    rows.emplace_back(workers, ms);
    std::cout << "workers=" << workers << " wall_ms=" << fmt_g17(ms)
              << " iterations=" << res.iterations << "\n";
  }
  write_timing_csv(out_path(a, "timing.csv"), rows);
  json j;
  j["run"] = run_metadata(a, "bench");
  j["status"] = all_converged ? "converged" : "not_converged";
  j["timing"] = json::array();
  for (auto& [wk, ms] : rows) j["timing"].push_back(json{{"workers", wk}, {"wall_ms", ms}});
  save_json(out_path(a, "report.json"), j);
  return 0;
}

void add_common(CLI::App* cmd, CommonArgs& a, bool needs_problem = true) {
  auto* p = cmd->add_option("--problem", a.problem,
                            "problem json file, or 'cstr' for the reactor benchmark");
  if (needs_problem) p->required();
  cmd->add_option("--out", a.out_dir, "output directory");
  cmd->add_option("--horizon", a.horizon, "override the number of stages");
  cmd->add_option("--partitions", a.partitions, "number of subdomains");
  cmd->add_option("--overlap", a.overlap, "overlap, or comma list of overlaps");
  cmd->add_option("--rho-reg", a.rho_reg, "input move penalty of the reactor problem");
  cmd->add_option("--tol-primal", a.tol_primal, "seam residual tolerance (state)");
  cmd->add_option("--tol-dual", a.tol_dual, "seam residual tolerance (costate)");
  cmd->add_option("--max-iter", a.max_iter, "sweep iteration cap");
  cmd->add_option("--threads", a.threads, "worker threads for subdomain solves");
  cmd->add_option("--seed", a.seed, "seed for randomized commands");
  cmd->add_option("--samples", a.samples, "perturbation samples (ads)");
  cmd->add_option("--sigma", a.sigma, "perturbation scale (ads)");
  cmd->add_option("--noise-floor", a.noise_floor,
                  "absolute response treated as solver noise (ads); default "
                  "picks per problem family");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"overlapping temporal decomposition solver"};
  app.require_subcommand(1);
  CommonArgs a;

  auto* c_solve = app.add_subcommand("solve", "solve the full horizon once");
  auto* c_schwarz = app.add_subcommand("schwarz", "run the overlapping sweep");
  auto* c_ads = app.add_subcommand("ads", "probe boundary-data sensitivity decay");
  auto* c_certify = app.add_subcommand("certify", "emit spectral decay certificates");
  auto* c_bench = app.add_subcommand("bench", "time the sweep across worker counts");
  for (auto* c : {c_solve, c_schwarz, c_ads, c_certify, c_bench}) add_common(c, a);

  try {
    app.parse(argc, argv);
    if (c_solve->parsed()) return cmd_solve(a);
    if (c_schwarz->parsed()) return cmd_schwarz(a);
    if (c_ads->parsed()) return cmd_ads(a);
    if (c_certify->parsed()) return cmd_certify(a);
    if (c_bench->parsed()) return cmd_bench(a);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
