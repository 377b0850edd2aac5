#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tempo/ocp.hpp"
#include "tempo/parallel.hpp"
#include "tempo/solver_options.hpp"

namespace tempo {

// One temporal subdomain: [m, n] is the owned stage range, [m_ext, n_ext] the
// extended range actually solved (grown by the overlap on each side, clipped
// at the horizon ends).
struct Subdomain {
  long m = 0, n = 0;
  long m_ext = 0, n_ext = 0;
};

// Splits {start,...,end} into `blocks` consecutive ranges whose sizes differ
// by at most one, longer ranges first, each then extended by `overlap`.
inline std::vector<Subdomain> partition(long start, long end, int blocks,
                                        long overlap) {
  if (end <= start) throw ValidationError("horizon must contain at least two stages");
  if (blocks < 1) throw ValidationError("need at least one subdomain");
  if (overlap < 0) throw ValidationError("overlap must be nonnegative");
  const long points = end - start + 1;
  if (blocks > points)
    throw ValidationError("more subdomains than grid points");
  std::vector<Subdomain> out(static_cast<size_t>(blocks));
  const long base = points / blocks;
  const long rem = points % blocks;
  long m = start;
  for (int k = 0; k < blocks; ++k) {
    const long len = base + (k < rem ? 1 : 0);
    Subdomain& d = out[static_cast<size_t>(k)];
    d.m = m;
    d.n = m + len - 1;
    d.m_ext = std::max(start, d.m - overlap);
    d.n_ext = std::min(end, d.n + overlap);
    if (d.n_ext == d.m_ext)
      throw ValidationError("subdomain " + std::to_string(k) +
                            " has no control interval; enlarge blocks or overlap");
    m = d.n + 1;
  }
  return out;
}

// Solves the window {a,...,b} of the full problem with the given boundary
// data, optionally warm-started. Implementations capture their own problem
// representation; stage indices are absolute.
using Subsolver = std::function<std::pair<PrimalDualTrajectory, SolveReport>(
    long a, long b, const BoundaryCondition& bc,
    const PrimalDualTrajectory* warm)>;

struct IterationRecord {
  int iter = 0;
  double r = 0.0;  // primal seam residual
  double s = 0.0;  // dual seam residual
  double err_inf = std::numeric_limits<double>::quiet_NaN();
  double wall_ms = 0.0;
};

enum class SchwarzStatus { converged, max_iterations, subsolver_failure };

struct SchwarzResult {
  PrimalDualTrajectory iterate;
  SchwarzStatus status = SchwarzStatus::max_iterations;
  int iterations = 0;
  std::vector<IterationRecord> log;
  int failed_block = -1;
  std::string failure_message;
};

struct SchwarzConfig {
  int blocks = 2;
  long overlap = 1;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;
  int max_iterations = 50;
  int workers = 1;
  // when set, per-iteration err_inf = max stage-wise distance to this solution
  const PrimalDualTrajectory* reference = nullptr;
  // starting iterate; default is all zeros with the boundary data pinned
  const PrimalDualTrajectory* initial = nullptr;
};

// Overlapping additive Schwarz sweep over the horizon. Every iteration solves
// all extended subdomains against the previous iterate's boundary data, keeps
// each solution on its owned range, and measures the seam mismatch that the
// discarded first overlap stage exposes: r is the state mismatch there, s the
// costate mismatch mapped through the dynamics Jacobians at the seam. Both
// vanish exactly at a fixed point of the sweep. A single subdomain has no
// seams and terminates after one iteration.
inline SchwarzResult schwarz_solve(const OcpProblem& p,
                                   const BoundaryCondition& bc,
                                   const SchwarzConfig& cfg,
                                   const Subsolver& solve_block) {
  p.validate();
  if (bc.x_init.size() != p.n_x || bc.lambda_terminal.size() != p.n_x)
    throw ValidationError("boundary condition has wrong dimensions");
  if (cfg.tol_primal <= 0.0 || cfg.tol_dual <= 0.0)
    throw ValidationError("tolerances must be positive");
  if (cfg.max_iterations < 1)
    throw ValidationError("need at least one iteration");
  const auto doms = partition(p.start, p.end, cfg.blocks, cfg.overlap);
  const size_t K = doms.size();
  if (cfg.overlap == 0 && K > 1)
    std::cerr << "schwarz_solve: overlap 0 leaves the seam controls out of "
                 "every subdomain; residuals are evaluated on the assembled "
                 "iterate and the sweep is not expected to contract\n";

  SchwarzResult res;
  res.iterate = cfg.initial ? *cfg.initial : PrimalDualTrajectory::zero(p, bc);
  if (res.iterate.start != p.start || res.iterate.end != p.end)
    throw ValidationError("initial iterate range does not match the horizon");
  res.iterate.x(p.start) = bc.x_init;
  res.iterate.lam(p.end) = bc.lambda_terminal;

  struct BlockOutcome {
    PrimalDualTrajectory sol;
    SolveReport rep;
    std::exception_ptr err;
  };
  std::vector<BlockOutcome> outcome(K);

  for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    const PrimalDualTrajectory prev = res.iterate;

    parallel_for(static_cast<int>(K), cfg.workers, [&](int k) {
      const Subdomain& d = doms[static_cast<size_t>(k)];
      BlockOutcome& o = outcome[static_cast<size_t>(k)];
      o.err = nullptr;
      try {
        BoundaryCondition wbc{prev.x(d.m_ext), prev.lam(d.n_ext)};
        PrimalDualTrajectory warm = prev.window(d.m_ext, d.n_ext);
        auto [sol, rep] = solve_block(d.m_ext, d.n_ext, wbc, &warm);
        o.sol = std::move(sol);
        o.rep = rep;
      } catch (...) {
        o.err = std::current_exception();
      }
    });

    for (size_t k = 0; k < K; ++k) {
      const BlockOutcome& o = outcome[k];
      if (o.err || !o.rep.converged) {
        res.status = SchwarzStatus::subsolver_failure;
        res.failed_block = static_cast<int>(k);
        if (o.err) {
          try {
            std::rethrow_exception(o.err);
          } catch (const std::exception& e) {
            res.failure_message = e.what();
          }
        } else {
          res.failure_message = "subdomain solve did not reach its tolerance";
        }
        res.iterations = iter;
        return res;
      }
    }

    // assemble: each subdomain owns [m, n]; the seam control u_n belongs to
    // the left subdomain whenever its extended range reaches past n
    for (size_t k = 0; k < K; ++k) {
      const Subdomain& d = doms[k];
      const PrimalDualTrajectory& sol = outcome[k].sol;
      for (long i = d.m; i <= d.n; ++i) {
        res.iterate.x(i) = sol.x(i);
        res.iterate.lam(i) = sol.lam(i);
      }
      const long u_hi = std::min(d.n, d.n_ext - 1);
      for (long i = d.m; i <= u_hi; ++i) {
        res.iterate.u(i) = sol.u(i);
        if (p.n_g > 0 && sol.has_mu() && res.iterate.has_mu())
          res.iterate.mu(i) = sol.mu(i);
      }
    }
    res.iterate.x(p.start) = bc.x_init;
    res.iterate.lam(p.end) = bc.lambda_terminal;

    IterationRecord rec;
    rec.iter = iter;
    for (size_t k = 0; k + 1 < K; ++k) {
      const Subdomain& d = doms[k];
      const long seam = d.n;
      double rk, sk;
      if (cfg.overlap >= 1) {
        const PrimalDualTrajectory& sol = outcome[k].sol;
        rk = inf_norm(sol.x(seam + 1) - res.iterate.x(seam + 1));
        const Vector dlam = sol.lam(seam + 1) - res.iterate.lam(seam + 1);
        const DynamicsEval de = p.dynamics(res.iterate.x(seam), res.iterate.u(seam), seam);
        sk = std::max(inf_norm(de.jac_x.transpose() * dlam),
                      inf_norm(de.jac_u.transpose() * dlam));
      } else {
        const Vector& xs = res.iterate.x(seam);
        const Vector& us = res.iterate.u(seam);
        const DynamicsEval de = p.dynamics(xs, us, seam);
        const CostEval ce = p.cost(xs, us, seam);
        rk = inf_norm(res.iterate.x(seam + 1) - de.next);
        Vector sx = ce.grad_x + de.jac_x.transpose() * res.iterate.lam(seam + 1) -
                    res.iterate.lam(seam);
        Vector su = ce.grad_u + de.jac_u.transpose() * res.iterate.lam(seam + 1);
        if (p.n_g > 0 && res.iterate.has_mu()) {
          const IneqEval ge = p.inequality(xs, us, seam);
          sx += ge.jac_x.transpose() * res.iterate.mu(seam);
          su += ge.jac_u.transpose() * res.iterate.mu(seam);
        }
        sk = std::max(inf_norm(sx), inf_norm(su));
      }
      rec.r = std::max(rec.r, rk);
      rec.s = std::max(rec.s, sk);
    }
    if (cfg.reference) rec.err_inf = z_distance(res.iterate, *cfg.reference);
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    res.log.push_back(rec);
    res.iterations = iter;

    if (rec.r < cfg.tol_primal && rec.s < cfg.tol_dual) {
      res.status = SchwarzStatus::converged;
      return res;
    }
  }
  res.status = SchwarzStatus::max_iterations;
  return res;
}

// Geometric mean of the per-iteration error contraction factors, ignoring
// iterations already at the accuracy floor of the logged reference error.
inline double observed_contraction(const std::vector<IterationRecord>& log,
                                   double reference_norm) {
  const double eps = std::numeric_limits<double>::epsilon();
  const double floor_err = 1e2 * eps * std::max(reference_norm, 1.0);
  double sum_log = 0.0;
  int used = 0;
  for (size_t t = 0; t + 1 < log.size(); ++t) {
    const double e0 = log[t].err_inf, e1 = log[t + 1].err_inf;
    if (!std::isfinite(e0) || !std::isfinite(e1)) continue;
    if (e0 <= floor_err || e1 <= 0.0) continue;
    sum_log += std::log(e1 / e0);
    ++used;
  }
  if (used < 2)
    throw Error("observed_contraction: fewer than two usable iteration pairs");
  return std::exp(sum_log / used);
}

}  // namespace tempo
